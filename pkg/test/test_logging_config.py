import io
import logging

import orjson

from logging_config import CustomJsonFormatter, generate_run_id, get_logger, setup_logging


def test_bound_context_reaches_the_record():
    buf = io.StringIO()
    setup_logging("DEBUG", stream=buf)
    handler = logging.getLogger().handlers[0]
    handler.setFormatter(CustomJsonFormatter("%(message)s"))
    try:
        log = get_logger("quadlab.test", run_id="r-1", seed=7).bind(replicate=3)
        log.info("📊 replicate 완료", extra={"seed": 8})
        payload = orjson.loads(buf.getvalue().splitlines()[-1])
    finally:
        setup_logging("WARNING")
    assert payload["run_id"] == "r-1"
    assert payload["replicate"] == 3
    # 호출 시 extra 가 바인딩 값보다 우선
    assert payload["seed"] == 8
    assert payload["level"] == "INFO"


def test_run_ids_are_unique():
    assert generate_run_id() != generate_run_id()
