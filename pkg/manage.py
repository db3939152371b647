#!/usr/bin/env python
"""Command-line entry point for the gaze-attention pipeline."""
import sys


def main():
    """Run a pipeline subcommand."""
    try:
        import django  # noqa: F401
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    from attention.cli import run
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
