#!/usr/bin/env python3

import sys

from fraclap.config import get_settings
from fraclap.main import main

if __name__ == "__main__":
    settings = get_settings()

    print(f"Starting fraclap experiment...")
    print(f"Command: {settings.command}")
    print(f"Domain: {settings.domain}")
    print(f"s values: {settings.s_values}")
    print(f"Theta: {settings.theta}")
    print(f"Cap: {settings.cap}")
    print(f"Output: {settings.out}")
    print(f"Log Level: {settings.log_level}")
    print("-" * 50)

    sys.exit(main([settings.command, *sys.argv[1:]]))
