# noqa: A005
"""Package logging.

The package stays silent unless `STABLE_CLUSTER_LOG_LEVEL` is `DEBUG` or `TRACE`,
or the command line was given `--log-level`. Output goes to stderr through
`click.echo`, which drops the colours of `color_message` extras whenever stderr
is not a terminal.
"""

import copy
import logging
import os
import typing

import click

LOG_LEVEL_ENV_VAR = "STABLE_CLUSTER_LOG_LEVEL"
TRACE_LOG_LEVEL = 5
LOG_LEVELS = {"TRACE": TRACE_LOG_LEVEL, "DEBUG": logging.DEBUG}

# Falsifier verdicts, coloured on terminals.
FALSIFIED_EXTRA = {"color_message": "falsifier " + click.style("%s", fg="red")}
SURVIVED_EXTRA = {"color_message": "falsifier " + click.style("%s", fg="green")}


class Logger(logging.Logger):
    # Stub for type checkers.
    def trace(
        self, message: str, *args: typing.Any, **kwargs: typing.Any
    ) -> None: ...  # pragma: no cover


class ColorMessageFormatter(logging.Formatter):
    """Render `color_message` instead of the plain message when a record has one."""

    def __init__(self) -> None:
        super().__init__(
            fmt="%(levelname)s [%(asctime)s] %(name)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    def formatMessage(self, record: logging.LogRecord) -> str:
        color_message = record.__dict__.get("color_message")
        if color_message is not None:
            record = copy.copy(record)
            record.message = color_message % record.args
        return super().formatMessage(record)


class EchoHandler(logging.Handler):
    def emit(self, record: logging.LogRecord) -> None:
        try:
            click.echo(self.format(record), err=True)
        except Exception:  # noqa: BLE001
            self.handleError(record)


class LoggerFactory:
    log_level_env_var = LOG_LEVEL_ENV_VAR

    def configure(self, log_level: str) -> bool:
        """Send package logs to stderr at `log_level`.

        Unknown levels leave logging untouched. Returns whether output is enabled.
        """
        level = LOG_LEVELS.get(log_level.upper())
        if level is None:
            return False
        logging.addLevelName(TRACE_LOG_LEVEL, "TRACE")
        logger = logging.getLogger("stable_cluster")
        logger.setLevel(level)
        if not any(isinstance(h, EchoHandler) for h in logger.handlers):
            handler = EchoHandler()
            handler.setFormatter(ColorMessageFormatter())
            logger.addHandler(handler)
        return True

    def get(self, name: str) -> Logger:
        """Get a logger instance, configuring output from the environment once."""
        if not getattr(self, "_initialized", False):
            logging.addLevelName(TRACE_LOG_LEVEL, "TRACE")
            self.configure(os.environ.get(self.log_level_env_var, ""))
            self._initialized = True

        logger = logging.getLogger(name)

        def trace(message: str, *args: typing.Any, **kwargs: typing.Any) -> None:
            logger.log(TRACE_LOG_LEVEL, message, *args, **kwargs)

        logger.trace = trace  # type: ignore[attr-defined]

        return typing.cast("Logger", logger)


_logger_factory = LoggerFactory()
get_logger = _logger_factory.get
configure_logging = _logger_factory.configure
