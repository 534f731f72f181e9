import logging
from pathlib import Path

from obp.utils.log_utils import master_log

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


class RunTracker:
    """
    Handle initialization and logging of a W&B run. Every method is a no-op when disabled,
    and wandb is only imported for enabled trackers.
    """

    def __init__(self, project: str, name: str | None = None, entity: str | None = None, config: dict | None = None, enabled: bool = False):
        self.enabled = enabled
        self.project = project
        self.name = name
        self.entity = entity
        self.run = None
        self.wandb = None
        if not self.enabled:
            return

        import wandb

        self.wandb = wandb
        self.run = wandb.init(project=project, entity=entity, name=name, config=config or {})
        master_log(logger, f"Initialized new run: {self.run.name} (ID: {self.run.id})")

    def log(self, metrics: dict, step: int):
        """
        Log metrics at given step.
        """
        if self.enabled:
            self.wandb.log(metrics, step=step)

    def summary(self, metrics: dict):
        if self.enabled:
            for key, value in metrics.items():
                self.run.summary[key] = value

    def save(self, path: str | Path, base_path: str | Path = "./"):
        """
        Save *any* file to wandb.
        """
        if self.enabled:
            self.wandb.save(str(path), base_path=str(base_path))

    def finish(self):
        if self.enabled:
            self.run.finish()
