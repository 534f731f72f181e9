import logging

from humanfriendly import format_timespan
from tqdm import tqdm as _tqdm

MASTER_NODE = 0


def master_log(logger, *args, node_id: int = MASTER_NODE, level=logging.INFO, **kwargs):
    if node_id == MASTER_NODE:
        logger.log(level, *args, **kwargs)


def get_slice_tqdm(warmup_slices: int = 5, log_every: int = 20):
    """
    tqdm over circuit slices that also logs the average time per slice once warm.
    """
    logger = logging.getLogger("Slice Timing")
    logger.setLevel(logging.INFO)

    class tqdm(_tqdm):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, **kwargs)
            self.warmup_time_elapsed = 0

        def update(self, n=1):
            super().update(n)
            step_passed = self.n - self.initial
            if step_passed == warmup_slices:
                self.warmup_time_elapsed = self.format_dict["elapsed"]
                logger.info(f"Warmup {warmup_slices} slice time: {format_timespan(self.warmup_time_elapsed)}")
            if (step_passed > warmup_slices and step_passed % log_every == 0) or self.n == self.total:
                elapsed = self.format_dict["elapsed"] - self.warmup_time_elapsed
                inv_rate = elapsed / max(step_passed - warmup_slices, 1)
                eta = (self.total - self.n) * inv_rate if self.total else 0.0
                logger.info(f"{self.n}/{self.total}: {inv_rate:.3f} s/slice, elapsed: {format_timespan(elapsed)} | remaining: {format_timespan(eta)}")

    return tqdm
