import pytest

from resumekit.porter import stem

from conftest import PORTER_CASES


@pytest.mark.parametrize("word,expected", PORTER_CASES)
def test_reference_table(word, expected):
    assert stem(word) == expected


def test_words_of_length_two_or_less_untouched():
    for w in ("a", "is", "be", "as", "on", ""):
        assert stem(w) == w


def test_input_is_lowercased():
    assert stem("Running") == "run"
    assert stem("CARESSES") == "caress"


def test_stemming_is_idempotent_on_table():
    for _, stemmed in PORTER_CASES:
        assert stem(stemmed) == stem(stem(stemmed))


def test_common_resume_vocabulary():
    assert stem("engineering") == "engin"
    assert stem("management") == "manag"
    assert stem("developed") == "develop"
    assert stem("responsibilities") == "respons"
