"""
Console Progress Output
=======================
Step/progress/success/error lines for the command-line front end.
Everything goes to stderr so stdout stays machine-readable JSON/CSV.
"""

import sys

_quiet = False


def set_quiet(quiet: bool):
    """Silence (or re-enable) all progress output"""
    global _quiet
    _quiet = quiet


def _emit(text: str):
    if not _quiet:
        print(text, file=sys.stderr)


def print_step(step: int, total: int, message: str):
    """Print formatted step progress"""
    _emit(f"\n📋 [{step}/{total}] {message}")
    _emit("=" * 60)


def print_progress(message: str):
    """Print progress message"""
    _emit(f"🔄 {message}")


def print_success(message: str):
    """Print success message"""
    _emit(f"✅ {message}")


def print_error(message: str):
    """Print error message (never silenced)"""
    print(f"❌ {message}", file=sys.stderr)


def print_warning(message: str):
    """Print warning message"""
    _emit(f"⚠️  {message}")


def print_info(message: str):
    """Print info message"""
    _emit(f"ℹ️  {message}")
