import logging
from concurrent.futures import ProcessPoolExecutor

from tqdm import tqdm

from .conf import rfim_setting

logger = logging.getLogger(__name__)


def parallel_map(fn, items, workers=None, desc=None):
    """Order-preserving map; fans out to processes when workers > 1."""
    items = list(items)
    workers = rfim_setting('WORKERS') if workers is None else workers
    show = rfim_setting('PROGRESS')
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show)]
    logger.info("Dispatching %d tasks to %d workers (%s)", len(items), workers, desc or fn.__name__)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=not show))


def progress(iterable, desc=None, total=None):
    return tqdm(iterable, desc=desc, total=total, disable=not rfim_setting('PROGRESS'))
