import json
import logging
import sys

from backend import init_package
from backend.errors import NLLTError
from backend.run_manager import RunManager
from backend.settings_manager import SettingsManager
from backend.utils import to_jsonable
from frontend.cli_commands import create_cli_parser

logger = logging.getLogger(__name__)
audit_logger = logging.getLogger('run.audit')


def create_app():
    settings_manager = SettingsManager()
    run_manager = RunManager(settings_manager=settings_manager)
    return create_cli_parser(run_manager, settings_manager)


def main(argv=None) -> int:
    parser = create_app()
    args = parser.parse_args(argv)  # usage errors exit 2
    init_package(args.log_level)

    try:
        report = args.handler(args)
    except NLLTError as e:
        logger.error(f"{args.command} failed: {e}")
        audit_logger.info(f"FAIL {args.command} - {type(e).__name__}, exit {e.exit_code}")
        print(f"nllt {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code

    json.dump(to_jsonable(report.to_dict()), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    audit_logger.info(f"EXIT {args.command} - 0")
    return 0


if __name__ == "__main__":
    sys.exit(main())
