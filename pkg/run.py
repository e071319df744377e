#!/usr/bin/env python3
"""
Main entry point for mazyalab.
Sets up logging and hands the arguments to the click CLI.
"""

import logging
import sys
from pathlib import Path

from rich.logging import RichHandler

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))


def setup_logging(verbose: bool = False, log_file: str = 'mazyalab.log'):
    """Rich console output plus a plain log file."""
    level = logging.DEBUG if verbose else logging.INFO
    file_handler = logging.FileHandler(log_file)
    file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))

    logging.basicConfig(
        level=level,
        format='%(message)s',
        handlers=[
            RichHandler(rich_tracebacks=False, show_path=False),
            file_handler,
        ]
    )
    # matplotlib's font manager is chatty at debug level
    logging.getLogger('matplotlib').setLevel(logging.WARNING)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    setup_logging(verbose='--verbose' in argv or '-v' in argv)

    from src.cli.main import main as cli_main
    return cli_main(argv)


if __name__ == '__main__':
    sys.exit(main())
