from cheeger_lab.cli import main

main()
