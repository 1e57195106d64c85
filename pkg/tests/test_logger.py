"""
Tests for logging setup.
"""

import logging
import logging.handlers

import pytest

from homotopy_seg.utils.logger import setup_logger


@pytest.fixture
def logger_name(request):
    name = f"homotopy_seg.test.{request.node.name}"
    yield name
    logger = logging.getLogger(name)
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)


class TestSetupLogger:
    """Test cases for setup_logger."""

    def test_console_only(self, logger_name):
        logger = setup_logger(logger_name, level="warning")
        assert logger.level == logging.WARNING
        assert len(logger.handlers) == 1
        assert isinstance(logger.handlers[0], logging.StreamHandler)

    def test_rotating_file(self, logger_name, tmp_path):
        log_file = tmp_path / "logs" / "run.log"
        logger = setup_logger(logger_name, level="INFO", log_file=str(log_file), max_size=1024, backup_count=2)
        rotating = [h for h in logger.handlers if isinstance(h, logging.handlers.RotatingFileHandler)]
        assert len(rotating) == 1
        assert rotating[0].maxBytes == 1024
        assert rotating[0].backupCount == 2

        logger.info("epoch 1 done")
        rotating[0].flush()
        assert "epoch 1 done" in log_file.read_text()

    def test_repeated_setup_keeps_handlers_and_updates_level(self, logger_name):
        first = setup_logger(logger_name, level="INFO")
        second = setup_logger(logger_name, level="DEBUG")
        assert first is second
        assert len(second.handlers) == 1
        assert second.level == logging.DEBUG
