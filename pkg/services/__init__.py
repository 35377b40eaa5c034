"""
Junction Services Module
"""

from services.logger import get_logger, setup_root_logger

__all__ = ["get_logger", "setup_root_logger"]
