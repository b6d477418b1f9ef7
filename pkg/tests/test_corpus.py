import io

import pytest

from tracexai.errors import DataError
from tracexai.static_xai.corpus import (
    IT_TERMS,
    NON_IT_TERMS,
    read_labelled_csv,
    synthetic_job_postings,
    write_labelled_csv,
)


def test_csv_round_trip():
    docs = ["plain", 'with "quotes", commas', "multi\nline", ""]
    data = write_labelled_csv(docs, [0, 1, 1, 0])
    got, labels = read_labelled_csv(io.StringIO(data))
    assert got == docs and labels.tolist() == [0, 1, 1, 0]


def test_job_postings_layout(tmp_path):
    p = tmp_path / "posts.csv"
    p.write_text('jobpost,date,Title,IT\n"Senior Java developer",Jan 5,Dev,TRUE\n"Hotel reception",Jan 6,Desk,FALSE\n')
    docs, labels = read_labelled_csv(p)
    assert docs == ["Senior Java developer", "Hotel reception"] and labels.tolist() == [1, 0]


@pytest.mark.parametrize("data", ["a,b\nx,1\n", "text,label\nx,2\n", "text,label\nx,yes\n", "text,label\nx,TRUE\n", ""])
def test_bad_csv(data):
    with pytest.raises(DataError):
        read_labelled_csv(io.StringIO(data))


def test_synthetic_postings():
    docs, labels = synthetic_job_postings(40, seed=3)
    assert labels.tolist() == [i % 2 for i in range(40)]
    assert all(60 <= len(d.split()) <= 120 for d in docs)
    it = sum(w in IT_TERMS for w in docs[1].split())
    non_it = sum(w in NON_IT_TERMS for w in docs[1].split())
    assert it > non_it
    assert synthetic_job_postings(40, seed=3)[0] == docs
    assert synthetic_job_postings(40, seed=4)[0] != docs
