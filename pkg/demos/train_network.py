"""Train one residual network and inspect its learning curve.

Shows the train / validation loss per epoch, the learning-rate schedule
and the epoch whose weights were kept.
"""

import numpy as np

from wettability import data_io as dio
from wettability import ensemble as E
from wettability import nn
from wettability import preprocessing as pp


def main():
    ds = dio.generate_synthetic(600, noise=5.0, seed=4)
    fit, val = E.split_validation(np.arange(500), 0.15, 0)
    test = np.arange(500, 600)
    params = pp.fit_transformer(ds.X[fit])
    Z = pp.apply_transformer(params, ds.X)
    scaler = E.TargetScaler.fit(ds.y[fit])
    arch = nn.Architecture(Z.shape[1], hidden=(64, 64, 64), dropout=0.2, residual_span=1)
    cfg = nn.TrainConfig(max_epochs=200, batch_size=32, lr=3e-3, early_stop_patience=20)
    model = nn.train_model(Z[fit], scaler.forward(ds.y[fit]), Z[val], scaler.forward(ds.y[val]), arch, cfg, seed=0)
    for h in model.history[:: max(1, len(model.history) // 12)]:
        print(f"epoch {h['epoch']:3d}  train {h['train_loss']:.4f}  val {h['val_loss']:.4f}  lr {h['lr']:.1e}")
    pred = scaler.inverse(model.predict(Z[test]))
    print(f"kept epoch {model.best_epoch}; test RMSE {E.rmse(ds.y[test], pred):.2f} deg, "
          f"R^2 {E.r2(ds.y[test], pred):.3f}")


if __name__ == "__main__":
    main()
