"""
Logger Setup Script
File: utils/utils_logger.py

Logging set-up shared by the simulation library, producers, consumers and CLI.

Features:
- Logs information, warnings, and errors to a designated log file.
- Ensures the log directory exists.
- Folder and level come from the environment (STW_LOG_FOLDER, STW_LOG_LEVEL).
"""

# Imports from Python Standard Library
import os
import pathlib

# Imports from external packages
from dotenv import load_dotenv
from loguru import logger

load_dotenv()

# Get this file name without the extension
CURRENT_SCRIPT = pathlib.Path(__file__).stem

# Set directory where logs will be stored
LOG_FOLDER: pathlib.Path = pathlib.Path(os.getenv("STW_LOG_FOLDER", "logs"))

# Set the name of the log file
LOG_FILE: pathlib.Path = LOG_FOLDER.joinpath("stochwave.log")

# Minimum level written to the log file
LOG_LEVEL: str = os.getenv("STW_LOG_LEVEL", "INFO").upper()

# Ensure the log folder exists or create it
try:
    LOG_FOLDER.mkdir(exist_ok=True)
except Exception as e:
    logger.error(f"Error creating log folder: {e}")

# Configure Loguru to write to the log file
try:
    logger.add(LOG_FILE, level=LOG_LEVEL, enqueue=True)
except Exception as e:
    logger.error(f"Error configuring logger to write to file: {e}")


def main() -> None:
    """Show where log output goes."""
    logger.info(f"STARTING {CURRENT_SCRIPT}.py")
    logger.info(f"Log level: {LOG_LEVEL}")
    logger.info(f"View the log output at {LOG_FILE}")
    logger.info(f"EXITING {CURRENT_SCRIPT}.py.")


# Conditional execution block that calls main() only when this file is executed directly
if __name__ == "__main__":
    main()
