"""
Texture Inpainting - Main Entry Point

Sets up structured logging and the run-scoped context, parses the command
line and dispatches to the chosen subcommand. Application errors end the
process with exit code 1 and a one-line diagnostic on stderr; usage errors
exit with code 2 from argparse.
"""

import sys
import uuid
from typing import Optional, Sequence

from pydantic import ValidationError

from app.cli import Handler, parse_args
from app.core.exceptions import AppException
from app.core.logging import command, get_logger, run_id, setup_logging
from app.core.settings import settings
from app.modules.ndtensor import set_checked, set_precision

logger = get_logger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except AppException as e:
        print(f"error: {e.message}", file=sys.stderr)
        return 1
    setup_logging(level=args.log_level)
    set_precision(settings.tensor.PRECISION)
    set_checked(settings.tensor.CHECKED)
    run_id.set(uuid.uuid4().hex[:12])
    command.set(args.command)

    handler: Handler = args.handler
    try:
        return handler(args)
    except AppException as e:
        logger.error(
            "Command failed",
            extra={"error": e.__class__.__name__, "details": e.details, "tags": ["cli"]},
        )
        print(f"error: {e.message}", file=sys.stderr)
        return 1
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        print(f"error: invalid value for {location or e.title}: {first['msg']}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
