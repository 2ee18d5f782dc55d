from dotenv import load_dotenv
from smoothfem import create_cli

# Load environment variables
load_dotenv()

# Create the command line
cli = create_cli()

if __name__ == '__main__':
    cli(prog_name='smoothfem')
