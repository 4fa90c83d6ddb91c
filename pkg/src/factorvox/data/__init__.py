from .toyCorpus import (synthesizeSample, buildCorpus, loadManifest, loadSample, loadCorpusSpec,
                        contentPairs, sampleSeed, SPLITS)

__all__ = ['synthesizeSample', 'buildCorpus', 'loadManifest', 'loadSample', 'loadCorpusSpec',
           'contentPairs', 'sampleSeed', 'SPLITS']
