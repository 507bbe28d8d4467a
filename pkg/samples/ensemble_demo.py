import os

import numpy as np
import rich
from dotenv import load_dotenv
from rich.table import Table

from survensemble import GeneratorSpec, fit_cross_fitted_ensemble, fit_model, generate
from survensemble.bench.ingest import Standardizer
from survensemble.bench.splits import split
from survensemble.config import configure_logging
from survensemble.ensemble import EnsembleConfig
from survensemble.scoring import evaluate_predictor

load_dotenv(override=True)
configure_logging(os.getenv("SURVENSEMBLE_LOG_LEVEL", "WARNING"))

# A synthetic table that favours neither family: Weibull failures, uniform censoring
data = generate(GeneratorSpec("cox_style", n=800, d=8, censor_target=0.5, seed=42)).dataset
train, validation = split(data, 0.8, seed=0)
scaler = Standardizer().fit(train)
train, validation = scaler.transform(train), scaler.transform(validation)

members = [("cox", {"ridge_alpha": 0.01}), ("weibull_aft", None), ("aalen", None), ("rsf", {"n_trees": 50})]
ensemble, weights = fit_cross_fitted_ensemble(members, train, EnsembleConfig(max_iter=1000), folds=5, seed=0)

table = Table(title="Validation scores")
table.add_column("Model")
table.add_column("Weight", justify="right")
table.add_column("C-index", justify="right")
table.add_column("IBS", justify="right")
for (kind, config), model, weight in zip(members, ensemble.components, ensemble.weights.values):
    scores = evaluate_predictor(model, validation)
    table.add_row(kind, f"{weight:.3f}", f"{scores['concordance']:.4f}", f"{scores['ibs']:.4f}")
scores = evaluate_predictor(ensemble, validation)
table.add_row("ensemble", "", f"{scores['concordance']:.4f}", f"{scores['ibs']:.4f}")
rich.print(table)

rich.print("Fold weights:", np.round([w.values for w in weights.fold_weights], 3))

# Any single member can be refit and inspected on its own
cox = fit_model("cox", train, {"ridge_alpha": 0.01})
curve = cox.predict_survival(validation.covariates[0])
rich.print({"subject 0 survival at median time": float(curve(np.median(validation.times)))})
