from finitary.cli import main

main()
