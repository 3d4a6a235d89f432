import random

import pytest

from polycurate.corpus import Document, LanguageKey
from polycurate.langid import CharNgramClassifier

FRA = LanguageKey("fra", "Latn")
DEU = LanguageKey("deu", "Latn")
ENG = LanguageKey("eng", "Latn")

# Small parallel-ish sentence pools per language for the toy classifier.
FRA_SENTENCES = [
    "le chat noir dort sur la table de la cuisine",
    "les enfants jouent dans le jardin avec leurs amis",
    "je voudrais un café et un croissant ce matin",
    "la maison est grande et le jardin est petit",
    "nous allons au marché pour acheter des légumes frais",
    "il fait beau aujourd'hui et le ciel est bleu",
    "elle lit un livre intéressant dans le salon",
    "le train arrive à la gare dans dix minutes",
]
DEU_SENTENCES = [
    "der schwarze Hund schläft unter dem großen Tisch",
    "die Kinder spielen im Garten mit ihren Freunden",
    "ich möchte einen Kaffee und ein Brötchen bitte",
    "das Haus ist groß und der Garten ist klein",
    "wir gehen zum Markt um frisches Gemüse zu kaufen",
    "heute ist das Wetter schön und der Himmel ist blau",
    "sie liest ein interessantes Buch im Wohnzimmer",
    "der Zug kommt in zehn Minuten am Bahnhof an",
]
ENG_SENTENCES = [
    "the black cat sleeps on the kitchen table",
    "the children play in the garden with their friends",
    "i would like a coffee and a croissant this morning",
    "the house is big and the garden is small",
    "we are going to the market to buy fresh vegetables",
    "the weather is nice today and the sky is blue",
    "she is reading an interesting book in the living room",
    "the train arrives at the station in ten minutes",
]


@pytest.fixture(scope="session")
def toy_classifier():
    labeled = (
        [(FRA, s) for s in FRA_SENTENCES]
        + [(DEU, s) for s in DEU_SENTENCES]
        + [(ENG, s) for s in ENG_SENTENCES]
    )
    return CharNgramClassifier.train(labeled)


def make_doc(i, text, url="", lang=None, **kw):
    return Document(id=f"doc{i:06d}", url=url, text=text, language=lang, **kw)


def synthetic_text(rng: random.Random, sentences, n_sentences=6):
    return " ".join(rng.choice(sentences) for _ in range(n_sentences))


@pytest.fixture
def rng():
    return random.Random(12345)
