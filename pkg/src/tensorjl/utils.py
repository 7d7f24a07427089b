from tensorjl.config import settings
from typing import Any
from typing import Callable
from typing import List
from typing import TypeVar
import asyncio
import logging
import pprint


T = TypeVar("T")


stream_handler = logging.StreamHandler()
stream_handler.setFormatter(
    logging.Formatter("%(asctime)s | %(levelname)s | %(name)s | %(message)s")
)


def get_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)
    if stream_handler not in logging.getLogger("tensorjl").handlers:
        logging.getLogger("tensorjl").addHandler(stream_handler)
    logger.setLevel(settings.LOG_LEVEL)
    return logger


def set_log_level(level: str) -> None:
    """Set the level of every tensorjl logger created so far."""
    settings.LOG_LEVEL = level
    logging.getLogger("tensorjl").setLevel(level)
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith("tensorjl.") and isinstance(logger, logging.Logger):
            logger.setLevel(level)


class lazypprint:
    def __init__(self, data: Any) -> None:
        self.data = data

    def __str__(self) -> str:
        return pprint.pformat(self.data)


async def gather_trials(
    trial: Callable[[int], T], trials: int, max_jobs: int
) -> List[T]:
    semaphore = asyncio.Semaphore(max_jobs)

    async def job(index: int) -> T:
        async with semaphore:
            return await asyncio.to_thread(trial, index)

    return list(await asyncio.gather(*[job(index) for index in range(trials)]))


def run_trials(trial: Callable[[int], T], trials: int, max_jobs: int = 1) -> List[T]:
    """Run trial(0..trials-1), results in trial-index order whatever the pool width."""
    if max_jobs <= 1:
        return [trial(index) for index in range(trials)]
    return asyncio.run(gather_trials(trial, trials, max_jobs))
