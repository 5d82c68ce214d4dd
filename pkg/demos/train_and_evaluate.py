"""
Training and evaluation
=======================

Featurize a dataset, train the three-hidden-layer network with Adam and
its two callbacks, then score it on held-out data.

Set ``EDGEMLP_DATA_DIR`` to a directory with the MNIST IDX files to run on
real digits; otherwise synthetic strokes are used. Training the full-size
network on all of MNIST takes a while on a CPU, so ``MAX_EPOCHS`` is small.
"""

import os

from edgemlp import MlpConfig, SplitSpec, TrainConfig, evaluate, init_model, top_confusions, train
from edgemlp.cli import split_cache
from edgemlp.features import featurize_batch
from edgemlp.training import class_names
from glyphs import demo_dataset

MAX_EPOCHS = 10
SEED = 0
BATCH_SIZE = 32
# Batch norm's running averages must keep pace with the weights. With a few
# thousand easy samples the weights still move quickly when the epochs end,
# so the default momentum of 0.99 lags; 0.9 tracks them. Use the default on
# full-size data.
BN_MOMENTUM = 0.99 if os.environ.get("EDGEMLP_DATA_DIR") else 0.9

ds = demo_dataset(3000)
features, labels = featurize_batch(ds)
parts = split_cache(features, labels, ds.class_count, SEED)
print({name: len(y) for name, (_, y) in parts.items()})

model = init_model(MlpConfig(output_dim=ds.class_count, bn_momentum=BN_MOMENTUM), SEED)
model, history = train(*parts["fit"], *parts["val"], model, TrainConfig(batch_size=BATCH_SIZE, max_epochs=MAX_EPOCHS, seed=SEED))

# each record holds the epoch's averaged training metrics and the validation pass
for r in history.records:
    print(f"epoch {r.epoch:2d}  loss {r.train_loss:.4f}  acc {r.train_accuracy:.4f}  "
          f"val_loss {r.val_loss:.4f}  val_acc {r.val_accuracy:.4f}  lr {r.lr:.1e}")
print(f"best epoch {history.best_epoch}, stopped early: {history.stopped_early}")

# weights from the best validation epoch are already restored
accuracy, cm = evaluate(model, *parts["test"])
names = class_names(ds.class_count)
print(f"\ntest accuracy {accuracy:.4f} on {cm.total} samples")
print("most frequent mistakes:", [(names[t], names[p], n) for t, p, n in top_confusions(cm, 5)])
