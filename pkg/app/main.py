import logging
import sys

from app.cli import build_parser
from app.config import settings
from app.core.exceptions import ConfigError, PinnError

logger = logging.getLogger("app")


def configure_logging() -> None:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(levelname)-5.5s [%(name)s] %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit like configuration errors
        return 0 if exc.code in (0, None) else ConfigError.exit_code
    try:
        return args.handler(args)
    except ConfigError as exc:
        for violation in exc.violations:
            logger.error("config: %s", violation)
        return exc.exit_code
    except PinnError as exc:
        logger.error("%s", exc.detail)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
