import logging
import sys
from pathlib import Path
from pprint import pformat

import hydra
from omegaconf import DictConfig, OmegaConf

from obp.config import Command, Config, register_configs, validate_config
from obp.errors import ConfigError, ObpError
from obp.experiments.commands import COMMANDS, EXIT_CONFIG, config_dict
from obp.experiments.tracking import RunTracker

register_configs()

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


def run_command(cfg: Config | DictConfig) -> int:
    """Validate ``cfg``, run its command and return the process exit code."""
    try:
        validate_config(cfg)
        command = COMMANDS[Command(cfg.command)]
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG

    t = cfg.tracking
    tracker = RunTracker(project=t.project, name=t.name, entity=t.entity, config=config_dict(cfg), enabled=t.enabled)
    try:
        return command(cfg, tracker)
    except ObpError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG
    finally:
        tracker.finish()


def _main(cfg: Config) -> int:
    cfg_dict = OmegaConf.to_container(cfg, resolve=True, throw_on_missing=False)
    logger.info(f"Launching with \n {pformat(cfg_dict)}.")
    return run_command(cfg)


@hydra.main(version_base=None, config_path=str(Path("configs").absolute().resolve()), config_name="config")
def main(cfg: Config):
    code = _main(cfg)
    if code:
        sys.exit(code)


if __name__ == "__main__":
    main()
