import random

import pytest

from historiographer.history import SearchHistory


def random_history(rng, vocabulary, max_entries=50, clicked_fraction=0.6, user_id="u"):
    hist = SearchHistory(user_id=user_id)
    for _ in range(rng.randint(0, max_entries)):
        query = rng.choice(vocabulary)
        time = rng.randint(1_000, 1_000_000)
        clicked = rng.random() < clicked_fraction
        url = f"http://example.com/{query.replace(' ', '-')}" if clicked else None
        hist.insert_search(query, time, url)
    return hist


@pytest.fixture(scope="session")
def wordlist():
    from historiographer.planner import bundled_wordlist

    return bundled_wordlist()


@pytest.fixture
def rng():
    return random.Random(12345)
