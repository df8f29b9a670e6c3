import pytest

from gobot.domain import (
    DomainSchema,
    REQUIRED_INTENTS,
    build_unified_space,
    kb_path_for,
    load_goals,
    load_schema,
    space_for_schema,
)
from gobot.kb import KnowledgeBase
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

INTENTS = tuple(REQUIRED_INTENTS)


def schema_of(*slots, name="toy"):
    return DomainSchema(name=name, slots=tuple(slots), user_intents=INTENTS)


@pytest.fixture(scope="session")
def movie_schema():
    return load_schema(DATA / "movie" / "schema.json")


@pytest.fixture(scope="session")
def restaurant_schema():
    return load_schema(DATA / "restaurant" / "schema.json")


@pytest.fixture(scope="session")
def tourist_schema():
    return load_schema(DATA / "tourist" / "schema.json")


@pytest.fixture(scope="session")
def restaurant_kb(restaurant_schema):
    return KnowledgeBase.from_file(DATA / "restaurant" / "kb.json", restaurant_schema)


@pytest.fixture(scope="session")
def restaurant_goals(restaurant_schema):
    return load_goals(DATA / "restaurant" / "goals_train.json", restaurant_schema)


@pytest.fixture(scope="session")
def extension_space(restaurant_schema, tourist_schema):
    return build_unified_space(restaurant_schema, tourist_schema)


@pytest.fixture(scope="session")
def overlap_space(movie_schema, restaurant_schema):
    return build_unified_space(movie_schema, restaurant_schema)


# small hand-checked domain used across module tests
@pytest.fixture()
def toy_schema():
    return schema_of("city", "date", "theater", name="shows")


@pytest.fixture()
def toy_kb(toy_schema):
    records = [
        {"city": "springfield", "date": "friday", "theater": "alpha"},
        {"city": "springfield", "date": "friday", "theater": "beta"},
        {"city": "shelbyville", "date": "sunday", "theater": "gamma"},
    ]
    return KnowledgeBase(toy_schema, records)


@pytest.fixture()
def toy_space(toy_schema):
    return space_for_schema(toy_schema)
