from nostra.cli import main

main()
