"""Tests for DMCL logging utilities."""

import re
import sys
import unittest
import warnings
from io import StringIO
from tempfile import NamedTemporaryFile

from dmcl.microarray import build_microarray_channel
from dmcl.symbols import build_symbol_channel
from dmcl.utils.logging import (
    close_and_remove_logger_handlers,
    get_dmcl_logger,
    orig_showwarning,
)
from dmcl.utils.testing import two_state_params, unlink

TEMP_FILES = []
TEMP_FILE_PATHS = []
LOGGERS = []


class TestLoggingUtils(unittest.TestCase):
    """Test class for logging utility tests."""

    def reset(self):
        for temp_file in TEMP_FILES:
            temp_file.close()
        TEMP_FILES.clear()
        for logger in LOGGERS:
            close_and_remove_logger_handlers(logger)
        LOGGERS.clear()
        for temp_file_path in TEMP_FILE_PATHS:
            unlink(temp_file_path)
        TEMP_FILE_PATHS.clear()
        warnings.showwarning = orig_showwarning

    def setUp(self):
        self.reset()

    def tearDown(self):
        self.reset()

    def make_logger(self, name):
        temp_file = NamedTemporaryFile("w", delete=False)
        temp_file.close()
        TEMP_FILES.append(temp_file)
        TEMP_FILE_PATHS.append(temp_file.name)
        logger = get_dmcl_logger(name, filepath=temp_file.name)
        LOGGERS.append(logger)
        return logger, temp_file.name

    def trigger_dmcl_warning(self):
        """Build a symbol channel whose taps cannot settle within ``L_max``."""
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            build_symbol_channel(build_microarray_channel(two_state_params()), 1.0, L_max=5)

    def test_get_dmcl_logger(self):
        logger, path = self.make_logger("test_get_dmcl_logger")

        msg1 = "message 1"
        logger.info(msg1)
        msg2 = "message 2"
        logger.info(msg2)

        with open(path) as tempfh:
            log_lines = tempfh.readlines()
            self.assertTrue(log_lines[0].endswith(f"INFO - {msg1}\n"))
            self.assertTrue(log_lines[1].endswith(f"INFO - {msg2}\n"))

    def test_get_dmcl_logger_reuses_file_handler(self):
        logger, path = self.make_logger("test_get_dmcl_logger_reuse")
        again = get_dmcl_logger("test_get_dmcl_logger_reuse", filepath=path)
        self.assertIs(again, logger)
        self.assertEqual(len(logger.handlers), 1)

    def test_get_dmcl_logger_with_warning(self):
        logger, path = self.make_logger("test_get_dmcl_logger_with_warning")

        msg1 = "message 1"
        logger.info(msg1)
        self.trigger_dmcl_warning()
        msg2 = "message 2"
        logger.info(msg2)

        with open(path) as log_file:
            log_lines = log_file.readlines()
        self.assertTrue(log_lines[0].endswith(f"INFO - {msg1}\n"))
        dmcl_warning_re = re.compile(
            r"WARNING - [^\n]+symbols.py:\d+: TruncationWarning:"
            r"Symbol channel did not settle within eps_tap"
        )
        self.assertRegex(log_lines[1], dmcl_warning_re)
        self.assertTrue(log_lines[-1].endswith(f"INFO - {msg2}\n"))

        # warnings raised outside dmcl still go to STDERR and not to the log
        old_stderr = sys.stderr
        try:
            msg3 = "message 3"
            sys.stderr = mystderr = StringIO()
            warnings.warn(msg3)
            err = mystderr.getvalue()
            self.assertIn(f"UserWarning: {msg3}", err)
            with open(path) as log_file:
                self.assertNotIn(f"UserWarning:{msg3}", log_file.read())
        finally:
            sys.stderr = old_stderr

    def test_close_and_remove_logger_handlers(self):
        logger, _ = self.make_logger("test_close_and_remove_logger_handlers")
        close_and_remove_logger_handlers(logger)
        self.assertFalse(logger.handlers)
