from hierperc.cli import main

main()
