"""Entry point for running as a module: python -m structured_light_sdf"""

from .cli import cli

if __name__ == '__main__':
    cli()
