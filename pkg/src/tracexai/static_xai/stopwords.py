"""Fixed English stopword list (version ``english-v1``).

Function words, pronouns, auxiliaries and common adverbs. The list is frozen:
changing it changes every vocabulary built with ``stop_words="english"``.
"""

ENGLISH_V1 = frozenset(
    """
    a about above after again against all almost also although always am among an and another any
    anyone anything are around as at be because been before being below between both but by can
    cannot could did do does doing done down during each either else enough etc even ever every
    few for from further had has have having he her here hers herself him himself his how however
    i if in into is it its itself just least less many may me might more most much must my myself
    neither no nor not now of off often on once one only or other others otherwise our ours
    ourselves out over own per perhaps please rather same several she should since so some still
    such than that the their theirs them themselves then there therefore these they this those
    though through thus to too toward towards under until up upon us very via was we well were what
    whatever when whenever where whereas whether which while who whoever whom whose why will with
    within without would yet you your yours yourself yourselves
    """.split()
)

STOPWORD_LISTS = {"english": ENGLISH_V1}
