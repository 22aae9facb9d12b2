import sys

from loguru import logger

from src.cli import main

if __name__ == "__main__":
    logger.info("Starting spec-causal")
    sys.exit(main())
