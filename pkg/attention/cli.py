import os
from typing import Sequence

from django.core.management import execute_from_command_line

SETTINGS_MODULE = 'gazeattn_project.settings'


def run(argv: Sequence[str]) -> int:
    """Dispatch a subcommand through Django's management utility and return its exit code."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', SETTINGS_MODULE)
    try:
        execute_from_command_line(['manage.py', *argv])
    except SystemExit as exc:
        if exc.code is None: return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0
