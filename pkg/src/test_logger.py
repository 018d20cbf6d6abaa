from core.services.logger_service import LoggerService


def test_logs_are_trimmed_newest_first():
    logger = LoggerService(max_logs=2, echo=False)
    for message in ("первое", "второе", "третье"):
        logger.info(message)
    assert [log.message for log in logger.get_logs()] == ["третье", "второе"]
    assert [log.id for log in logger.get_logs()] == ["000003", "000002"]


def test_records_are_chronological():
    logger = LoggerService(echo=False)
    logger.info("старт")
    logger.error("сбой")
    assert logger.as_records() == [
        {"level": "INFO", "message": "старт"},
        {"level": "ERROR", "message": "сбой"},
    ]


def test_snapshot_is_detached():
    logger = LoggerService(echo=False)
    snapshot = logger.get_logs()
    logger.warning("позже")
    assert snapshot == []
    assert len(logger.get_logs()) == 1
