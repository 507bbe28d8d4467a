from pathlib import Path

import rich
from dotenv import load_dotenv

from survensemble import fit_model, kaplan_meier
from survensemble.bench.ingest import DatasetManifest, ingest
from survensemble.config import configure_logging

load_dotenv(override=True)
configure_logging("INFO")

manifest = DatasetManifest.from_file(Path(__file__).parent / "data" / "toy_trial.json")
dataset = ingest(manifest)
rich.print({"subjects": dataset.n, "features": dataset.feature_names, "censored": round(dataset.censoring_rate, 3)})

km = kaplan_meier(dataset.times, dataset.events)
rich.print({"Kaplan-Meier": dict(zip(km.times.tolist(), km.values.round(3).tolist()))})

cox = fit_model("cox", dataset, {"ridge_alpha": 0.1})
rich.print(dict(zip(dataset.feature_names, cox.beta.round(3).tolist())))
