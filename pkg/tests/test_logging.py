import logging

from contchoreo.logging import ColorizedFormatter, getLogger, logger, set_log_level


def test_get_logger__inherits_level():
    set_log_level(logging.DEBUG)
    try:
        assert getLogger("contchoreo.test_inherit").level == logging.DEBUG
    finally:
        set_log_level(logging.INFO)


def test_set_log_level__updates_module_loggers():
    child = getLogger("contchoreo.test_update")
    set_log_level(logging.ERROR)
    try:
        assert child.level == logging.ERROR
        assert logger.level == logging.ERROR
        # unrelated loggers keep their level
        assert logging.getLogger("unrelated").level == logging.NOTSET
    finally:
        set_log_level(logging.INFO)


def test_colorized_formatter__leaves_record(mocker):
    mocker.patch("contchoreo.logging.settings.NO_COLOR", False)
    record = logging.makeLogRecord({"levelname": "WARNING", "levelno": 30, "msg": "x"})
    text = ColorizedFormatter("%(levelname)s %(message)s").format(record)
    assert "\u001b[" in text
    assert record.levelname == "WARNING"
