from ter.harness.evaluate import evaluate, random_policy_return, run_episode
from ter.harness.records import RunRecord, aggregate, aggregate_dir, emit, from_csv, read_records, to_csv
from ter.harness.loop import Learner, Run, collect_random_dataset, rng_streams, train, train_offline, updates_due

__all__ = [
    "evaluate", "random_policy_return", "run_episode", "RunRecord", "aggregate", "aggregate_dir",
    "emit", "from_csv", "read_records", "to_csv", "Learner", "Run", "collect_random_dataset",
    "rng_streams", "train", "train_offline", "updates_due",
]
