import struct

import numpy as np
import pytest

from factorvox.audio.wavio import readWav, writeWav


def test_pcm16_header(tmp_path):
    path = tmp_path / "tone.wav"
    writeWav(str(path), 0.5 * np.sin(np.linspace(0, 20, 1600)), 16000)
    blob = path.read_bytes()
    assert blob[:4] == b"RIFF" and blob[8:12] == b"WAVE"
    assert blob[12:16] == b"fmt "
    audioFormat, channels, rate, byteRate, blockAlign, bits = struct.unpack("<HHIIHH", blob[20:36])
    assert (audioFormat, channels, rate, bits) == (1, 1, 16000, 16)
    assert byteRate == 32000 and blockAlign == 2
    assert len(blob) == 44 + 2 * 1600


def test_samples_survive_to_pcm16_precision(tmp_path):
    wave = np.linspace(-0.9, 0.9, 400)
    writeWav(str(tmp_path / "ramp.wav"), wave)
    loaded, rate = readWav(str(tmp_path / "ramp.wav"), expectedRate=16000)
    assert rate == 16000 and loaded.dtype == np.float32
    assert np.allclose(loaded, wave, atol=1.0 / 32767.0)


def test_out_of_range_samples_are_clipped(tmp_path):
    writeWav(str(tmp_path / "loud.wav"), np.array([2.0, -3.0, 0.0]))
    loaded, _ = readWav(str(tmp_path / "loud.wav"))
    assert np.allclose(loaded, [1.0, -1.0, 0.0])


def test_rate_mismatch_and_missing_file(tmp_path):
    writeWav(str(tmp_path / "a.wav"), np.zeros(10), 8000)
    with pytest.raises(ValueError):
        readWav(str(tmp_path / "a.wav"), expectedRate=16000)
    with pytest.raises(FileNotFoundError):
        readWav(str(tmp_path / "b.wav"))
