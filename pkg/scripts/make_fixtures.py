#!/usr/bin/env python3
"""Regenerate the fixture datasets under data/.

Three domains with the structure the experiments need: movie and restaurant
share their time/place slots (domain overlap), tourist contains every
restaurant slot plus two of its own (domain extension). Goals are sampled
from KB records so every goal is satisfiable by construction.

Deterministic: re-running produces byte-identical files.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data"

INTENTS = ["inform", "request", "thanks", "deny", "close"]

CITIES = ["seattle", "portland", "boston", "chicago", "denver", "austin"]
DATES = ["today", "tomorrow", "friday", "saturday", "sunday"]
PEOPLE = ["1", "2", "3", "4", "5", "6"]
TIMES = ["5pm", "6pm", "7pm", "8pm", "9pm"]

MOVIES = ["stardust", "ironclad", "moonrise", "riptide", "afterglow",
          "clockwork", "windfall", "labyrinth"]
THEATERS = ["grand_cinema", "bijou", "cinemaplex", "rialto", "orpheum", "paramount"]

RESTAURANTS = ["luigis", "golden_wok", "taj_palace", "el_sombrero", "bangkok_garden",
               "chez_marie", "olive_grove", "kyoto_house", "brasserie_lune", "smokehouse_47"]
FOODS = ["italian", "chinese", "indian", "mexican", "thai", "french"]
PRICES = ["cheap", "moderate", "expensive"]

AREAS = ["centre", "north", "south", "east", "west"]
ATTRACTIONS = ["museum", "park", "gallery", "zoo", "castle", "aquarium"]

DOMAINS = {
    "movie": {
        "slots": ["city", "date", "movie_name", "number_of_people", "start_time", "theater"],
        "values": {
            "city": CITIES, "date": DATES, "movie_name": MOVIES,
            "number_of_people": PEOPLE, "start_time": TIMES, "theater": THEATERS,
        },
        # goals constrain what the user already knows and request what the KB answers
        "constrainable": ["city", "date", "movie_name", "number_of_people"],
        "requestable": ["theater", "start_time", "movie_name"],
    },
    "restaurant": {
        "slots": ["city", "date", "food_type", "number_of_people", "price_range",
                  "restaurant_name", "start_time"],
        "values": {
            "city": CITIES, "date": DATES, "food_type": FOODS,
            "number_of_people": PEOPLE, "price_range": PRICES,
            "restaurant_name": RESTAURANTS, "start_time": TIMES,
        },
        "constrainable": ["city", "date", "food_type", "number_of_people", "price_range"],
        "requestable": ["restaurant_name", "start_time", "price_range"],
    },
    "tourist": {
        "slots": ["area", "attraction", "city", "date", "food_type", "number_of_people",
                  "price_range", "restaurant_name", "start_time"],
        "values": {
            "area": AREAS, "attraction": ATTRACTIONS, "city": CITIES, "date": DATES,
            "food_type": FOODS, "number_of_people": PEOPLE, "price_range": PRICES,
            "restaurant_name": RESTAURANTS, "start_time": TIMES,
        },
        "constrainable": ["area", "city", "date", "food_type", "number_of_people",
                          "price_range"],
        "requestable": ["restaurant_name", "attraction", "start_time", "price_range"],
    },
}

N_KB_RECORDS = 60
N_TRAIN_GOALS = 120
N_TEST_GOALS = 32


def make_kb(spec: dict, rng: random.Random) -> list[dict[str, str]]:
    records = []
    seen = set()
    while len(records) < N_KB_RECORDS:
        rec = {slot: rng.choice(spec["values"][slot]) for slot in spec["slots"]}
        key = tuple(sorted(rec.items()))
        if key in seen:
            continue
        seen.add(key)
        records.append(rec)
    return records


def make_goals(spec: dict, kb: list[dict[str, str]], n: int,
               rng: random.Random) -> list[dict]:
    goals = []
    seen = set()
    while len(goals) < n:
        record = rng.choice(kb)
        n_inform = rng.choice([2, 3])
        n_request = rng.choice([1, 2])
        inform_slots = sorted(rng.sample(spec["constrainable"], n_inform))
        requestable = [s for s in spec["requestable"] if s not in inform_slots]
        request_slots = sorted(rng.sample(requestable, min(n_request, len(requestable))))
        goal = {
            "inform_slots": {s: record[s] for s in inform_slots},
            "request_slots": request_slots,
        }
        key = json.dumps(goal, sort_keys=True)
        if key in seen:
            continue
        seen.add(key)
        goals.append(goal)
    return goals


def dump(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=False) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def main() -> None:
    for name, spec in DOMAINS.items():
        rng = random.Random(f"fixtures:{name}")
        out = OUT / name
        out.mkdir(parents=True, exist_ok=True)
        kb = make_kb(spec, rng)
        dump(out / "kb.json", kb)
        dump(out / "schema.json", {
            "name": name,
            "slots": spec["slots"],
            "user_intents": INTENTS,
            "kb": "kb.json",
        })
        dump(out / "goals_train.json", make_goals(spec, kb, N_TRAIN_GOALS, rng))
        dump(out / "goals_test.json", make_goals(spec, kb, N_TEST_GOALS, rng))


if __name__ == "__main__":
    main()
