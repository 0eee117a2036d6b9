"""Command-line entry points for trihlab."""

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2
