import os

import exercises


def make_default_playlist() -> exercises.Playlist:
    """The full acceptance playlist; LRV_ACCEPTANCE_THREADS spreads replications over worker processes."""
    playlist = exercises.make_default_playlist()
    threads = int(os.environ.get('LRV_ACCEPTANCE_THREADS', '1'))
    for exercise in playlist:
        exercise.threads = threads
    return playlist
