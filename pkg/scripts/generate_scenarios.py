#!/usr/bin/env python3
"""Regenerate the bundled scenario files.

The three-task stool uses fixed durations so event traces are exactly
reproducible by hand. The twelve-task table (three tasks per leg, four
legs) carries empirical duration distributions calibrated so that the
per-unit human assembly time averages about 374.8 s with a standard
deviation of about 61.1 s; per-task sample lists are moment-matched and
rounded to 0.01 s.
"""

import json
import sys
from pathlib import Path

import numpy as np

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "jitkit" / "scenarios"

UNIT_HUMAN_MEAN = 374.78
UNIT_HUMAN_SD = 61.14

# Per-task human means by stage (4 tasks each): feet snap on fastest,
# mounting a leg to the plank is slowest. Sums to UNIT_HUMAN_MEAN.
HUMAN_MEANS = {"attach_connector": 30.0, "attach_foot": 25.0, "mount_leg": 38.695}
ROBOT_MEANS = {"attach_connector": 26.0, "attach_foot": 28.0, "mount_leg": 24.0}
ROBOT_SD = 5.0
SAMPLES_PER_TASK = 12


def moment_matched_samples(rng, mean, sd, count, floor=1.5):
    """Random-looking sample list with exact population mean/sd (before a
    0.01 rounding), all samples above ``floor``."""
    for _ in range(1000):
        raw = rng.normal(mean, sd, size=count)
        centered = raw - raw.mean()
        spread = centered.std()
        if spread == 0:
            continue
        adjusted = centered / spread * sd + mean
        if adjusted.min() >= floor:
            return [round(float(v), 2) for v in adjusted]
    raise RuntimeError("could not satisfy sample floor; loosen parameters")


def build_table(rng) -> dict:
    stage_names = sorted(HUMAN_MEANS)
    total_sq = sum(4 * HUMAN_MEANS[s] ** 2 for s in stage_names)
    scale = (UNIT_HUMAN_SD ** 2 / total_sq) ** 0.5

    part_types = [
        {"id": "plank", "name": "table plank", "bbox_width_mm": 300, "bbox_height_mm": 300},
        {"id": "leg", "name": "table leg", "bbox_width_mm": 220, "bbox_height_mm": 35},
        {"id": "foot", "name": "leg foot", "bbox_width_mm": 50, "bbox_height_mm": 50},
        {"id": "connector", "name": "connector joint", "bbox_width_mm": 70, "bbox_height_mm": 35},
        {"id": "screw_box", "name": "screw box", "bbox_width_mm": 60, "bbox_height_mm": 40},
        {"id": "nut_box", "name": "nut box", "bbox_width_mm": 50, "bbox_height_mm": 35},
    ]
    parts = [{"id": "plank_1", "part_type": "plank"}]
    for k in range(1, 5):
        parts += [
            {"id": f"leg_{k}", "part_type": "leg"},
            {"id": f"foot_{k}", "part_type": "foot"},
            {"id": f"connector_{k}", "part_type": "connector"},
            {"id": f"screws_{k}", "part_type": "screw_box"},
            {"id": f"nuts_{k}", "part_type": "nut_box"},
        ]

    tasks = []
    for k in range(1, 5):
        stage_parts = {
            "attach_foot": [f"leg_{k}", f"foot_{k}"],
            "attach_connector": [f"connector_{k}", f"screws_{k}"],
            "mount_leg": [f"nuts_{k}"] + (["plank_1"] if k == 1 else []),
        }
        stage_preds = {
            "attach_foot": [],
            "attach_connector": [],
            "mount_leg": [f"attach_foot_{k}", f"attach_connector_{k}"],
        }
        stage_title = {
            "attach_foot": f"Attach foot {k} to leg {k}",
            "attach_connector": f"Secure connector {k} to leg {k}",
            "mount_leg": f"Mount leg {k} on the plank",
        }
        for stage in ("attach_foot", "attach_connector", "mount_leg"):
            human = moment_matched_samples(
                rng, HUMAN_MEANS[stage], scale * HUMAN_MEANS[stage], SAMPLES_PER_TASK
            )
            robot = moment_matched_samples(
                rng, ROBOT_MEANS[stage], ROBOT_SD, SAMPLES_PER_TASK, floor=5.0
            )
            tasks.append({
                "id": f"{stage}_{k}",
                "name": stage_title[stage],
                "human_duration_dist": human,
                "robot_duration_dist": robot,
                "predecessors": stage_preds[stage],
                "required_parts": stage_parts[stage],
            })
    tasks.sort(key=lambda t: t["id"])
    return {
        "name": "table_12task",
        "part_types": part_types,
        "parts": parts,
        "tasks": tasks,
        "tray": {"width_mm": 650, "height_mm": 550},
    }


def build_stool() -> dict:
    return {
        "name": "stool",
        "part_types": [
            {"id": "top", "name": "stool top", "bbox_width_mm": 240, "bbox_height_mm": 240},
            {"id": "screw_box", "name": "screw box", "bbox_width_mm": 60, "bbox_height_mm": 40},
            {"id": "leg", "name": "stool leg", "bbox_width_mm": 180, "bbox_height_mm": 30},
        ],
        "parts": [
            {"id": "top_1", "part_type": "top"},
            {"id": "screws_1", "part_type": "screw_box"},
            {"id": "leg_front_left", "part_type": "leg"},
            {"id": "leg_front_right", "part_type": "leg"},
            {"id": "leg_back_left", "part_type": "leg"},
            {"id": "leg_back_right", "part_type": "leg"},
        ],
        "tasks": [
            {
                "id": "a1", "name": "Insert screws to top",
                "human_duration_s": 20, "robot_duration_s": 10,
                "predecessors": [], "required_parts": ["top_1", "screws_1"],
            },
            {
                "id": "a2", "name": "Insert front legs",
                "human_duration_s": 20, "robot_duration_s": 10,
                "predecessors": ["a1"],
                "required_parts": ["leg_front_left", "leg_front_right"],
            },
            {
                "id": "a3", "name": "Insert back legs",
                "human_duration_s": 20, "robot_duration_s": 10,
                "predecessors": ["a1"],
                "required_parts": ["leg_back_left", "leg_back_right"],
            },
        ],
        "tray": {"width_mm": 420, "height_mm": 360},
    }


def build_example_experiment() -> dict:
    return {
        "name": "example_experiment",
        "scenario": "table_12task.json",
        "strategies": ["whole_assembly", "single_task", "optimized"],
        "replications": 5,
        "output_dir": "results",
        "sim": {
            "num_units": 10,
            "mat_by_part_type": {"leg": 60, "foot": 60},
            "mttf_by_machine": {"leg": 600, "foot": 600},
            "repair_time_s": 30,
            "delivery_time_s": 10,
            "seed": 7,
        },
        "planner": {
            "horizon_n": 5,
            "delivery_time_s": 10,
            "weights": {"w1": 1e6, "w2": 1, "w3": 1, "w4": 1, "w5": 0.01, "w7": 1e4},
            "ce": {"samples": 200, "elite": 30, "max_iters": 100, "seed": 0},
        },
        "sweep": {
            "mat_values": [0, 30, 120, 300],
            "mttf_values": [None, 600, 120],
            "governed_part_types": ["leg", "foot"],
        },
    }


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240517)
    for name, doc in (
        ("stool.json", build_stool()),
        ("table_12task.json", build_table(rng)),
        ("example_experiment.json", build_example_experiment()),
    ):
        path = OUT_DIR / name
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
