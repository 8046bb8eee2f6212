"""Stdio recognizer worker wrapping the template baseline.

Run as ``python -m manchu_ocr.worker``; speaks the length-prefixed PNG
protocol used by SubprocessRecognizer.  ``--delay`` and ``--reply`` exist
for exercising timeout and parsing paths.
"""
from __future__ import annotations

import argparse
import sys
import time

from .config import load_config
from .harness import open_recognizer
from .recognizers import serve_stdio


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="python -m manchu_ocr.worker")
    p.add_argument("--config")
    p.add_argument("--recognizer", default="baseline")
    p.add_argument("--delay", type=float, default=0.0, help="sleep before each reply")
    p.add_argument("--reply", help="fixed reply text instead of recognizing")
    args = p.parse_args(argv)

    if args.reply is not None:
        fixed = args.reply.replace("\\n", "\n")

        def answer(img):
            time.sleep(args.delay)
            return fixed
    else:
        config = load_config(args.config)
        recognizer = open_recognizer(config.recognizer(args.recognizer), config)

        def answer(img):
            time.sleep(args.delay)
            return recognizer.answer(img)

    serve_stdio(answer)
    return 0


if __name__ == "__main__":
    sys.exit(main())
