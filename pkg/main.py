from src.cli.app import create_cli_app

cli = create_cli_app()
app = cli.app


def main():
    cli.run()


if __name__ == "__main__":
    main()
