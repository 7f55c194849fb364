from rumorlens.cli import main

main()
