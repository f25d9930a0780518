"""PCA reduction and softmax probes on a toy two-cluster problem.

Builds a 2-d dataset embedded in 20 dims with nuisance directions, fits
PCA on the training half, and trains a linear probe on the reduced
coordinates. Shows the eigenvalue spectrum and the train/test accuracy.

Run:  python demos/02_pca_and_probes.py
"""

import numpy as np

from tune_probe.features import fit_pca, project
from tune_probe.probes import TrainConfig, predict, train

rng = np.random.default_rng(0)

# two class means in a 2-d signal plane, embedded into 20 dims
basis = np.linalg.qr(rng.standard_normal((20, 2)))[0]
means = np.array([[2.0, 0.0], [-2.0, 0.0]])
n_per = 200
signal = np.concatenate(
    [means[c] + 0.6 * rng.standard_normal((n_per, 2)) for c in (0, 1)]
)
labels = np.repeat([0, 1], n_per)
X = signal @ basis.T + 0.3 * rng.standard_normal((2 * n_per, 20))

order = rng.permutation(2 * n_per)
X, labels = X[order], labels[order]
X_train, X_test = X[:300], X[300:]
y_train, y_test = labels[:300], labels[300:]

pca = fit_pca(X_train)
print("top eigenvalues:", np.round(pca.eigenvalues[:5], 1))

d_pca = 4
Z_train = project(pca, X_train, d_pca)
Z_test = project(pca, X_test, d_pca)

probe, losses = train(
    "linear", Z_train, y_train, 2,
    TrainConfig(learning_rate=0.05, batch_size=32, epochs=80, seed=0),
)
print(f"final training loss: {losses[-1]:.4f}")
print(f"train accuracy: {(predict(probe, Z_train) == y_train).mean():.3f}")
print(f"test accuracy:  {(predict(probe, Z_test) == y_test).mean():.3f}")

probe_nl, _ = train(
    "nonlinear", Z_train, y_train, 2,
    TrainConfig(learning_rate=0.02, batch_size=32, epochs=80, seed=0),
    d_hidden=16,
)
print(f"nonlinear test accuracy: {(predict(probe_nl, Z_test) == y_test).mean():.3f}")
