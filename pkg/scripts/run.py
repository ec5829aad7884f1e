#!/usr/bin/env python3
"""
interimcore - Application Entry Point.

Bootstrap script: configures logging before any solver module is imported,
puts `src/` on the module path, and hands the arguments to the typer app in
`src/main.py`.

    scripts/run.py check problems/worked_example.yaml --profile "[[1], [1], [1]]"
    scripts/run.py paper-example --json out/example.json
    scripts/run.py verify out/example.json

Logging format is "HH:MM:SS | LEVEL | logger.name | message"; pass
--verbose to the app for DEBUG output (LP statuses, pivot counts).
"""
import logging
import sys
from pathlib import Path


def _configure_logging() -> None:
    """Configure application-wide logging before other imports."""
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s | %(levelname)s | %(name)s | %(message)s',
        datefmt='%H:%M:%S'
    )


# Add src to path (src is at project root; this script is under scripts/)
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

if __name__ == '__main__':
    _configure_logging()

    from main import app
    app(prog_name='interimcore')
