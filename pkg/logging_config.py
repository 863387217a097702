# logging_config.py
"""
📝 quadlab 로깅

- stdout 은 트리 / 맵 / 보고서 데이터 전용, 로그는 전부 stderr
- production: JSON 한 줄 로그 (python-json-logger)
- 그 외: 사람이 읽는 텍스트 로그
- 실험 컨텍스트 (run_id, seed, replicate, experiment) 는 get_logger 로 묶는다
"""

import logging
import sys
import uuid
from typing import IO, Optional

from pythonjsonlogger import jsonlogger

from config import ENV, IS_PRODUCTION, LOG_LEVEL

# JSON 로그에 그대로 올리는 실험 컨텍스트 키
CONTEXT_FIELDS = ("run_id", "seed", "replicate", "experiment")

# 로그 레벨을 따로 낮춰 둘 서드파티 로거
NOISY_LOGGERS = ("joblib", "numexpr", "matplotlib")


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """레코드 메타데이터 + 실험 컨텍스트를 붙이는 JSON 포맷터"""

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)

        log_record.update(
            timestamp=record.created,
            level=record.levelname,
            logger=record.name,
            function=record.funcName,
            line=record.lineno,
            environment=ENV,
            # joblib 워커는 프로세스 id 로 구분한다
            process_id=record.process,
        )
        for key in CONTEXT_FIELDS:
            value = getattr(record, key, None)
            if value is not None:
                log_record[key] = value


class ContextLoggerAdapter(logging.LoggerAdapter):
    """바인딩된 실험 컨텍스트를 extra 에 넣는다 (호출 시 extra 가 같은 키면 호출 쪽 우선)"""

    def process(self, msg, kwargs):
        kwargs["extra"] = {**self.extra, **kwargs.get("extra", {})}
        return msg, kwargs

    def bind(self, **context) -> "ContextLoggerAdapter":
        return ContextLoggerAdapter(self.logger, {**self.extra, **context})


def _formatter() -> logging.Formatter:
    if IS_PRODUCTION:
        return CustomJsonFormatter("%(timestamp)s %(level)s %(logger)s %(message)s")
    return logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - [%(funcName)s:%(lineno)d] - %(message)s"
    )


def setup_logging(level: Optional[str] = None, stream: Optional[IO[str]] = None) -> None:
    """
    루트 로거 재설정 (CLI 콜백에서 명령마다 호출)

    Args:
        level: 로그 레벨 이름, 없으면 LOG_LEVEL
        stream: 출력 스트림, 없으면 현재 sys.stderr
    """
    effective_level = (level or LOG_LEVEL).upper()

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, effective_level))
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(_formatter())
    root_logger.addHandler(handler)

    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logging.debug(
        f"✅ 로깅 설정 완료 (환경: {ENV}, 레벨: {effective_level}, 포맷: {'JSON' if IS_PRODUCTION else 'TEXT'})"
    )


def get_logger(name: str, **context) -> ContextLoggerAdapter:
    """
    실험 컨텍스트가 묶인 로거

    Example:
        log = get_logger(__name__, run_id=generate_run_id(), seed=7)
        log.bind(replicate=3).info("📊 replicate 완료")
    """
    return ContextLoggerAdapter(logging.getLogger(name), context)


def generate_run_id() -> str:
    """실험 실행 ID (UUID4)"""
    return str(uuid.uuid4())
