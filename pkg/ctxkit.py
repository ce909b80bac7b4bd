#!/usr/bin/env python3
"""Entry point: python ctxkit.py <command> ... (see USAGE_GUIDE.md)"""

import sys

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
