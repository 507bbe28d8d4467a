import os

import rich
from dotenv import load_dotenv

from survensemble import GeneratorSpec, ModelSpec, ScenarioSpec, run_scenario
from survensemble.bench.cli import scenario_table
from survensemble.config import configure_logging, get_settings

load_dotenv(override=True)
configure_logging(os.getenv("SURVENSEMBLE_LOG_LEVEL", "WARNING"))

# How quickly does each model's concordance grow with the training size?
scenario = ScenarioSpec.from_dict({"axis": "samples", "grid": [50, 100, 200, 500], "replications": 5})
generator = GeneratorSpec("aft_style", d=12, censor_target=0.5)
models = [ModelSpec.from_dict(kind) for kind in ("cox", "weibull_aft", "aalen")]

result = run_scenario(scenario, generator, models, n_jobs=get_settings().workers)
rich.print(scenario_table(result))
rich.print({"realized censoring": [round(c, 3) for c in result.realized_censoring]})
