from concurrent.futures import ProcessPoolExecutor


def map_ordered(worker, jobs: list, workers: int = 1) -> list:
    """worker(job) for every job, in job order; worker and jobs must pickle when workers > 1."""
    if workers <= 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
