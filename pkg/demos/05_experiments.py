"""Full experiment protocols: inter-dataset matrix and joint training.

Single-dataset mode trains one model per dataset and evaluates every
model on every dataset's held-out test split.  Joint mode merges the
train and validation splits of all datasets, then still reports each
test split separately.  Repeated runs are averaged with mean/std.
"""

from scopeworks import DatasetSpec, ExperimentConfig, make_rule_corpus, run
from scopeworks.experiment import ModelSettings, SplitSpec, TokenizerSettings
from scopeworks.metrics import MetricsReport, render_table
from scopeworks.model import TrainConfig

datasets = (
    DatasetSpec(name="A", corpus=make_rule_corpus(160, seed=1, name="A")),
    DatasetSpec(name="B", corpus=make_rule_corpus(120, seed=2, name="B")),
)

common = dict(
    task="cue",
    datasets=datasets,
    split=SplitSpec(seed=4),
    tokenizer=TokenizerSettings(max_len=64),
    model=ModelSettings(n_hidden=32, encoder_layers=1, attention_heads=4,
                        ffn_width=64, dropout=0.1),
    train=TrainConfig(learning_rate=1e-3, batch_size=8, max_epochs=20,
                      early_stop_patience=5, seed=0),
)

print("== single-dataset training: 2x2 inter-dataset matrix, 2 runs ==")
bundle = run(ExperimentConfig(runs=2, **common))
print(render_table([MetricsReport.from_json_obj(o)
                    for o in bundle["reports"]["averaged"]]))
print("config hash:", bundle["provenance"]["config_hash"][:16], "...")
print("run seeds:  ", bundle["provenance"]["run_seeds"])

print("\n== joint training: merged train/val, per-dataset test reports ==")
joint = run(ExperimentConfig(runs=2, joint=True, **common))
print(render_table([MetricsReport.from_json_obj(o)
                    for o in joint["reports"]["averaged"]]))
