#!/usr/bin/env python3
"""
treepin - Main Entry Point
==========================

Directed polymers on a disordered tree with a defect branch or subtree.
"""

from treepin.cli import main

if __name__ == "__main__":
    main()
