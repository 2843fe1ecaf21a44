"""Entry point for python -m diagram_landmarks."""
import sys

from diagram_landmarks.cli import main

if __name__ == "__main__":
    sys.exit(main())
