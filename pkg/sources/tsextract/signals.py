# vim: set filetype=python fileencoding=utf-8:
# -*- coding: utf-8 -*-

#============================================================================#
#                                                                            #
#  Licensed under the Apache License, Version 2.0 (the "License");           #
#  you may not use this file except in compliance with the License.          #
#  You may obtain a copy of the License at                                   #
#                                                                            #
#      http://www.apache.org/licenses/LICENSE-2.0                            #
#                                                                            #
#  Unless required by applicable law or agreed to in writing, software       #
#  distributed under the License is distributed on an "AS IS" BASIS,         #
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.  #
#  See the License for the specific language governing permissions and       #
#  limitations under the License.                                            #
#                                                                            #
#============================================================================#



''' Audio I/O, power-controlled mixing, and corpus simulation.

    Power is measured as the mean squared amplitude over the unpadded
    samples of a signal. Components of a mixture are zero-padded at their
    tails to the length of the longest component.

    Audio and manifest records are plain frozen dataclasses compared by
    identity, since they hold sample arrays or on-disk state. Settings
    records, which load from TOML and feed configuration digests, derive
    from the standard dataclass object like every other settings record
    in the package.
'''


from __future__ import annotations

from . import __
from . import configuration as _configuration
from . import exceptions as _exceptions


_scribe = __.logging.getLogger( __name__ )


DEFAULT_SAMPLE_RATE = 16000
MANIFEST_FORMAT = 1
SPLITS = ( 'train', 'dev', 'test' )

_READABLE_FORMATS = frozenset( ( 'WAV', 'WAVEX' ) )
_READABLE_SUBTYPES = frozenset( (
    'DOUBLE', 'FLOAT', 'PCM_16', 'PCM_24', 'PCM_32' ) )


class MixtureTypes( str, __.enum.Enum ):
    ''' Kinds of simulated mixtures. '''

    TwoSpeakers = '2mix'
    ThreeSpeakers = '3mix'
    NoisyTwoSpeakers = 'noisymix'


class SegmentModes( str, __.enum.Enum ):
    ''' Segmentation behaviors. '''

    Training = 'training'
    Evaluation = 'evaluation'


class TailPolicies( str, __.enum.Enum ):
    ''' Treatment of short final chunks during segmentation. '''

    Pad = 'pad'
    Drop = 'drop'


class NoiseFitPolicies( str, __.enum.Enum ):
    ''' Treatment of noise shorter than the speech mixture. '''

    Loop = 'loop'
    Strict = 'strict'


@__.dcls.dataclass( frozen = True, eq = False )
class Waveform:
    ''' Mono audio samples at a fixed sample rate. '''

    samples: __.Samples
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__( self ) -> None:
        samples = __.np.asarray( self.samples, dtype = __.np.float64 )
        if 1 != samples.ndim:
            raise _exceptions.AudioFormatError(
                '<waveform>', f"expected mono samples, got {samples.shape}" )
        if self.sample_rate <= 0:
            raise _exceptions.AudioFormatError(
                '<waveform>', f"invalid sample rate {self.sample_rate}" )
        if not __.np.all( __.np.isfinite( samples ) ):
            raise _exceptions.AudioFormatError(
                '<waveform>', 'non-finite samples' )
        object.__setattr__( self, 'samples', samples )

    def __len__( self ) -> int: return self.samples.shape[ 0 ]

    @property
    def duration( self ) -> float:
        ''' Duration in seconds. '''
        return len( self ) / self.sample_rate

    def padded( self, length: int ) -> __.typx.Self:
        ''' Returns copy zero-padded at tail to at least length. '''
        return type( self )(
            _pad_tail( self.samples, length ), self.sample_rate )

    def scaled( self, gain: float ) -> __.typx.Self:
        ''' Returns copy with samples multiplied by gain. '''
        return type( self )( self.samples * gain, self.sample_rate )


@__.dcls.dataclass( frozen = True, eq = False )
class Utterance:
    ''' Clean utterance of a known speaker. '''

    speaker_id: str
    utterance_id: str
    waveform: Waveform


@__.dcls.dataclass( frozen = True, eq = False )
class MixtureExample:
    ''' One simulated training or evaluation instance.

        The target is unscaled. Interferers and noise are stored as scaled
        into the mixture, each at its own (unpadded) length.
    '''

    mixture: Waveform
    target: Waveform
    interferers: tuple[ Waveform, ... ]
    noise: __.Absential[ Waveform ]
    reference: Waveform
    target_speaker_id: str
    interferer_ids: tuple[ str, ... ]
    snr_db: float
    noise_snr_db: __.Absential[ float ]
    mixture_type: MixtureTypes

    @property
    def interference( self ) -> Waveform:
        ''' Sum of scaled interfering speakers. '''
        return _sum_waveforms( self.interferers )


@__.dcls.dataclass( frozen = True, eq = False )
class ManifestEntry:
    ''' Record of one simulated mixture on disk. '''

    utterance_id: str
    mixture_path: __.Path
    target_path: __.Path
    reference_path: __.Path
    speaker_id: str
    snr_db: float
    mixture_type: MixtureTypes
    interferer_ids: tuple[ str, ... ] = ( )
    noise_snr_db: float | None = None


@__.dcls.dataclass( frozen = True, eq = False )
class CorpusManifest:
    ''' Entries of one corpus split plus provenance. '''

    entries: tuple[ ManifestEntry, ... ]
    seed: int
    split: str
    config: __.cabc.Mapping[ str, __.typx.Any ]
    config_hash: str

    @property
    def speakers( self ) -> frozenset[ str ]:
        ''' Target and interfering speakers appearing in the manifest. '''
        speakers: set[ str ] = set( )
        for entry in self.entries:
            speakers.add( entry.speaker_id )
            speakers.update( entry.interferer_ids )
        return frozenset( speakers )


class SimulationConfig( __.ccstd.DataclassObject ):
    ''' Settings for corpus simulation. '''

    sample_rate: int = DEFAULT_SAMPLE_RATE
    snr_range_db: tuple[ float, float ] = ( 0.0, 5.0 )
    noise_snr_range_db: tuple[ float, float ] = ( -6.0, 3.0 )
    noise_fit: str = NoiseFitPolicies.Loop.value
    test_speakers: int = 2
    counts: __.cabc.Mapping[ str, __.cabc.Mapping[ str, int ] ] = (
        __.dcls.field( default_factory = lambda: {
            'train': { '2mix': 200 },
            'dev': { '2mix': 40 },
            'test': { '2mix': 40 } } ) )

    def __post_init__( self ) -> None:
        for name in ( 'snr_range_db', 'noise_snr_range_db' ):
            low, high = getattr( self, name )
            if low > high:
                raise _exceptions.ConfigurationError(
                    'signal', f"{name} lower bound exceeds upper bound" )
        try: NoiseFitPolicies( self.noise_fit )
        except ValueError as exception:
            raise _exceptions.ConfigurationError(
                'signal',
                f"unknown noise_fit {self.noise_fit!r}" ) from exception
        if self.test_speakers < 0:
            raise _exceptions.ConfigurationError(
                'signal', 'test_speakers must be non-negative' )
        for split, counts in self.counts.items( ):
            if split not in SPLITS:
                raise _exceptions.ConfigurationError(
                    'signal', f"unknown split {split!r}" )
            for mixture_type, count in counts.items( ):
                try: MixtureTypes( mixture_type )
                except ValueError as exception:
                    raise _exceptions.ConfigurationError(
                        'signal',
                        f"unknown mixture type {mixture_type!r}"
                    ) from exception
                if count < 0:
                    raise _exceptions.ConfigurationError(
                        'signal',
                        f"negative count for {split}/{mixture_type}" )

    def count_entries( self, split: str ) -> int:
        ''' Total number of mixtures requested for split. '''
        return sum( self.counts.get( split, { } ).values( ) )


SpeechIndex: __.typx.TypeAlias = __.cabc.Mapping[ str, tuple[ __.Path, ... ] ]


def read_wav(
    location: __.PathLike,
    sample_rate: __.typx.Annotated[
        __.Absential[ int ],
        __.ddoc.Doc( ''' Expected sample rate of the corpus, if any. ''' ),
    ] = __.absent,
) -> Waveform:
    ''' Reads mono WAV file as waveform.

        Accepts 32-bit and 64-bit float and 16/24/32-bit PCM data.
    '''
    path = __.Path( location )
    try:
        with __.sf.SoundFile( str( path ) ) as stream:
            if stream.format not in _READABLE_FORMATS:
                raise _exceptions.AudioFormatError(
                    path, f"container {stream.format}" )
            if stream.subtype not in _READABLE_SUBTYPES:
                raise _exceptions.AudioFormatError(
                    path, f"sample encoding {stream.subtype}" )
            if 1 != stream.channels:
                raise _exceptions.AudioFormatError(
                    path, f"{stream.channels} channels (expected mono)" )
            rate = stream.samplerate
            samples = stream.read( dtype = 'float64' )
    except ( OSError, RuntimeError ) as exception:
        raise _exceptions.AudioFormatError(
            path, str( exception ) ) from exception
    if not __.is_absent( sample_rate ) and rate != sample_rate:
        raise _exceptions.SampleRateMismatchError(
            sample_rate, rate, str( path ) )
    return Waveform( samples, rate )


def write_wav(
    location: __.PathLike,
    waveform: Waveform,
    subtype: __.typx.Annotated[
        str, __.ddoc.Doc( ''' Sample encoding of the WAV file. ''' )
    ] = 'FLOAT',
) -> None:
    ''' Writes waveform as mono WAV file. '''
    path = __.Path( location )
    path.parent.mkdir( parents = True, exist_ok = True )
    __.sf.write(
        str( path ), waveform.samples, waveform.sample_rate,
        subtype = subtype, format = 'WAV' )


def measure_power( waveform: Waveform ) -> float:
    ''' Mean squared amplitude over unpadded samples. '''
    if 0 == len( waveform ): return 0.0
    return float( __.np.mean( __.np.square( waveform.samples ) ) )


def mix_at_snr(
    target: Waveform,
    interference: Waveform,
    snr_db: __.typx.Annotated[
        float,
        __.ddoc.Doc( ''' Target-to-interference power ratio in decibels. ''' ),
    ],
) -> tuple[ Waveform, Waveform ]:
    ''' Scales interference to SNR relative to target and mixes.

        Returns mixture and scaled interference. Target is not scaled.
    '''
    _require_same_rate( target, interference )
    gain = _calculate_gain(
        _require_power( target, 'target' ),
        _require_power( interference, 'interference' ),
        snr_db )
    scaled = interference.scaled( gain )
    return _sum_waveforms( ( target, scaled ) ), scaled


def make_2mix(
    target: Utterance,
    interferer: Utterance,
    reference: Utterance,
    snr_db: float,
) -> MixtureExample:
    ''' Simulates two-speaker mixture at SNR. '''
    _validate_speakers( target, ( interferer, ), reference )
    mixture, scaled = mix_at_snr(
        target.waveform, interferer.waveform, snr_db )
    return MixtureExample(
        mixture = mixture,
        target = target.waveform,
        interferers = ( scaled, ),
        noise = __.absent,
        reference = reference.waveform,
        target_speaker_id = target.speaker_id,
        interferer_ids = ( interferer.speaker_id, ),
        snr_db = snr_db,
        noise_snr_db = __.absent,
        mixture_type = MixtureTypes.TwoSpeakers )


def make_3mix(
    target: Utterance,
    interferer_a: Utterance,
    interferer_b: Utterance,
    reference: Utterance,
    snr_db: __.typx.Annotated[
        float,
        __.ddoc.Doc(
            ''' Target power relative to sum of both interferers, in dB. ''' ),
    ],
) -> MixtureExample:
    ''' Simulates three-speaker mixture with equal-power interferers. '''
    _validate_speakers( target, ( interferer_a, interferer_b ), reference )
    wave_a, wave_b = interferer_a.waveform, interferer_b.waveform
    _require_same_rate( target.waveform, wave_a )
    _require_same_rate( target.waveform, wave_b )
    power_a = _require_power( wave_a, interferer_a.utterance_id )
    power_b = _require_power( wave_b, interferer_b.utterance_id )
    wave_b = wave_b.scaled( __.math.sqrt( power_a / power_b ) )
    interference = _sum_waveforms( ( wave_a, wave_b ) )
    gain = _calculate_gain(
        _require_power( target.waveform, 'target' ),
        _require_power( interference, 'interference' ),
        snr_db )
    scaled_a, scaled_b = wave_a.scaled( gain ), wave_b.scaled( gain )
    return MixtureExample(
        mixture = _sum_waveforms( ( target.waveform, scaled_a, scaled_b ) ),
        target = target.waveform,
        interferers = ( scaled_a, scaled_b ),
        noise = __.absent,
        reference = reference.waveform,
        target_speaker_id = target.speaker_id,
        interferer_ids = ( interferer_a.speaker_id, interferer_b.speaker_id ),
        snr_db = snr_db,
        noise_snr_db = __.absent,
        mixture_type = MixtureTypes.ThreeSpeakers )


def make_noisymix( # noqa: PLR0913
    target: Utterance,
    interferer: Utterance,
    noise: Waveform,
    reference: Utterance,
    snr_db: float,
    noise_snr_db: __.typx.Annotated[
        float,
        __.ddoc.Doc(
            ''' Power of louder speaker relative to noise, in dB. ''' ),
    ],
    noise_fit: NoiseFitPolicies = NoiseFitPolicies.Loop,
    noise_offset: __.typx.Annotated[
        int,
        __.ddoc.Doc( ''' Start sample within noise longer than mixture. ''' ),
    ] = 0,
) -> MixtureExample:
    ''' Simulates two-speaker mixture with additive background noise. '''
    two_mix = make_2mix( target, interferer, reference, snr_db )
    _require_same_rate( target.waveform, noise )
    fitted = fit_noise(
        noise, len( two_mix.mixture ), noise_fit, offset = noise_offset )
    louder = max(
        measure_power( two_mix.target ),
        measure_power( two_mix.interferers[ 0 ] ) )
    gain = _calculate_gain(
        louder, _require_power( fitted, 'noise' ), noise_snr_db )
    scaled_noise = fitted.scaled( gain )
    return MixtureExample(
        mixture = Waveform(
            two_mix.mixture.samples + scaled_noise.samples,
            two_mix.mixture.sample_rate ),
        target = two_mix.target,
        interferers = two_mix.interferers,
        noise = scaled_noise,
        reference = two_mix.reference,
        target_speaker_id = two_mix.target_speaker_id,
        interferer_ids = two_mix.interferer_ids,
        snr_db = snr_db,
        noise_snr_db = noise_snr_db,
        mixture_type = MixtureTypes.NoisyTwoSpeakers )


def fit_noise(
    noise: Waveform,
    length: int,
    policy: NoiseFitPolicies = NoiseFitPolicies.Loop,
    offset: int = 0,
) -> Waveform:
    ''' Crops or loops noise to exact length. '''
    available = len( noise )
    if available >= length:
        start = offset % ( available - length + 1 )
        return Waveform(
            noise.samples[ start : start + length ], noise.sample_rate )
    if NoiseFitPolicies( policy ) is NoiseFitPolicies.Strict or 0 == available:
        raise _exceptions.SignalLengthError(
            'noise', available, f"at least {length} samples" )
    _scribe.debug( 'Looping noise of %d samples to %d.', available, length )
    repeats = -( -length // available )
    return Waveform(
        __.np.tile( noise.samples, repeats )[ : length ], noise.sample_rate )


def segment(
    waveform: Waveform,
    length_s: __.typx.Annotated[
        float, __.ddoc.Doc( ''' Chunk duration in seconds. ''' )
    ],
    mode: SegmentModes = SegmentModes.Training,
    tail: TailPolicies = TailPolicies.Pad,
) -> list[ Waveform ]:
    ''' Splits waveform into fixed-length chunks for training.

        Evaluation mode returns the whole utterance untouched.
    '''
    if length_s <= 0:
        raise _exceptions.ConfigurationError(
            'segment', f"length must be positive, got {length_s}" )
    if SegmentModes( mode ) is SegmentModes.Evaluation: return [ waveform ]
    size = round( length_s * waveform.sample_rate )
    tail = TailPolicies( tail )
    chunks: list[ Waveform ] = [ ]
    for start in range( 0, len( waveform ), size ):
        chunk = waveform.samples[ start : start + size ]
        if chunk.shape[ 0 ] < size:
            if tail is TailPolicies.Drop: break
            chunk = _pad_tail( chunk, size )
        chunks.append( Waveform( chunk, waveform.sample_rate ) )
    return chunks


def read_speech_index( location: __.PathLike ) -> SpeechIndex:
    ''' Reads clean-speech index of ``speaker<TAB>path`` lines.

        Relative paths are resolved against the index file directory.
    '''
    path = __.Path( location )
    utterances: dict[ str, list[ __.Path ] ] = { }
    for number, line in enumerate( _read_lines( path ), start = 1 ):
        fields = line.split( '\t' )
        if 2 != len( fields ):
            raise _exceptions.ManifestError(
                path, f"line {number} is not 'speaker<TAB>path'" )
        speaker, utterance = fields
        utterances.setdefault( speaker, [ ] ).append(
            _resolve( path.parent, utterance ) )
    return _freeze_index( utterances )


def survey_speech_directory( location: __.PathLike ) -> SpeechIndex:
    ''' Builds clean-speech index from ``<speaker>/<utterance>.wav`` tree. '''
    root = __.Path( location )
    if not root.is_dir( ):
        raise _exceptions.ManifestError( root, 'not a directory' )
    utterances = {
        directory.name: sorted( directory.glob( '*.wav' ) )
        for directory in sorted( root.iterdir( ) ) if directory.is_dir( ) }
    return _freeze_index( {
        speaker: paths for speaker, paths in utterances.items( ) if paths } )


def read_noise_index( location: __.PathLike ) -> tuple[ __.Path, ... ]:
    ''' Reads noise index with one path per line. '''
    path = __.Path( location )
    return tuple(
        _resolve( path.parent, line ) for line in _read_lines( path ) )


def partition_speakers(
    speech_index: SpeechIndex,
    test_speakers: int,
    seed: int,
) -> tuple[ tuple[ str, ... ], tuple[ str, ... ] ]:
    ''' Partitions speakers into disjoint train/dev and test sets. '''
    speakers = sorted( speech_index )
    if test_speakers >= len( speakers ) and test_speakers:
        raise _exceptions.CorpusInsufficiencyError(
            f"{len( speakers )} speakers cannot hold out {test_speakers} "
            "for testing and still leave training speakers" )
    generator = __.np.random.default_rng( ( seed, _PARTITION_STREAM ) )
    order = generator.permutation( len( speakers ) )
    chosen = sorted( speakers[ i ] for i in order[ : test_speakers ] )
    remainder = tuple(
        speaker for speaker in speakers if speaker not in chosen )
    return remainder, tuple( chosen )


def simulate_corpus( # noqa: PLR0913
    speech_index: SpeechIndex,
    noise_index: __.cabc.Sequence[ __.Path ],
    config: SimulationConfig,
    seed: int,
    output_directory: __.typx.Annotated[
        __.PathLike,
        __.ddoc.Doc( ''' Directory to receive audio and manifests. ''' ),
    ],
    config_hash: __.typx.Annotated[
        __.Absential[ str ],
        __.ddoc.Doc( ''' Digest of enclosing run configuration. ''' ),
    ] = __.absent,
) -> dict[ str, CorpusManifest ]:
    ''' Simulates 2-mix, 3-mix, and noisy-mix corpora for all splits.

        Each entry derives its randomness from seed, split, and entry
        number alone, so results are deterministic and entries may be
        simulated in any order.
    '''
    destination = __.Path( output_directory )
    snapshot = _configuration.record_to_mapping( config )
    if __.is_absent( config_hash ):
        config_hash = _configuration.calculate_digest( snapshot )
    _require_usable_index( speech_index )
    pools = dict( zip(
        ( 'train', 'test' ),
        partition_speakers( speech_index, config.test_speakers, seed ),
        strict = True ) )
    pools[ 'dev' ] = pools[ 'train' ]
    if config.count_entries( 'test' ) and not config.test_speakers:
        raise _exceptions.CorpusInsufficiencyError(
            'test mixtures requested without held-out test speakers' )
    reader = _WaveformCache( config.sample_rate )
    manifests: dict[ str, CorpusManifest ] = { }
    for split_number, split in enumerate( SPLITS ):
        if not config.count_entries( split ): continue
        entries = _simulate_split(
            _SplitRequest(
                split = split, split_number = split_number,
                speakers = pools[ split ], seed = seed,
                destination = destination ),
            speech_index, noise_index, config, reader )
        manifests[ split ] = CorpusManifest(
            entries = tuple( entries ), seed = seed, split = split,
            config = snapshot, config_hash = config_hash )
        save_manifest(
            manifests[ split ], destination / f"{split}.jsonl" )
        _scribe.info(
            'Simulated %d mixtures for split %r.', len( entries ), split )
    verify_disjoint_splits( manifests )
    return manifests


def verify_disjoint_splits(
    manifests: __.cabc.Mapping[ str, CorpusManifest ]
) -> None:
    ''' Ensures test speakers never appear in train or dev manifests. '''
    if 'test' not in manifests: return
    seen: set[ str ] = set( )
    for split in ( 'train', 'dev' ):
        if split in manifests: seen.update( manifests[ split ].speakers )
    shared = seen & manifests[ 'test' ].speakers
    if shared: raise _exceptions.SplitOverlapError( shared )


def save_manifest( manifest: CorpusManifest, location: __.PathLike ) -> None:
    ''' Writes manifest as JSON Lines, header record first.

        Paths under the manifest directory are stored relative to it.
    '''
    path = __.Path( location )
    path.parent.mkdir( parents = True, exist_ok = True )
    anchor = path.parent.resolve( )
    header = {
        'kind': 'header',
        'format': MANIFEST_FORMAT,
        'split': manifest.split,
        'seed': manifest.seed,
        'config_hash': manifest.config_hash,
        'config': manifest.config,
        'three_mix_snr': 'target-vs-interference-sum',
    }
    lines = [ _dump_record( header ) ]
    lines.extend(
        _dump_record( _entry_to_record( entry, anchor ) )
        for entry in manifest.entries )
    path.write_text( ''.join( lines ), encoding = 'utf-8' )


def load_manifest( location: __.PathLike ) -> CorpusManifest:
    ''' Reads manifest, resolving and checking every referenced path. '''
    path = __.Path( location )
    try: text = path.read_text( encoding = 'utf-8' )
    except OSError as exception:
        raise _exceptions.ManifestError(
            path, f"cannot read ({exception})" ) from exception
    try:
        records = [
            __.json.loads( line ) for line in text.splitlines( )
            if line.strip( ) ]
    except ValueError as exception:
        raise _exceptions.ManifestError(
            path, f"malformed record ({exception})" ) from exception
    if not records or 'header' != records[ 0 ].get( 'kind' ):
        raise _exceptions.ManifestError( path, 'missing header record' )
    header = records[ 0 ]
    anchor = path.parent.resolve( )
    entries = tuple(
        _record_to_entry( record, anchor, path ) for record in records[ 1 : ] )
    try:
        return CorpusManifest(
            entries = entries, seed = int( header[ 'seed' ] ),
            split = str( header[ 'split' ] ),
            config = header.get( 'config', { } ),
            config_hash = str( header[ 'config_hash' ] ) )
    except KeyError as exception:
        raise _exceptions.ManifestError(
            path, f"header lacks {exception}" ) from exception


_PARTITION_STREAM = 0x5BEA4E5


@__.dcls.dataclass( frozen = True )
class _SplitRequest:
    split: str
    split_number: int
    speakers: tuple[ str, ... ]
    seed: int
    destination: __.Path


class _WaveformCache:
    ''' Reads source audio once per path. '''

    def __init__( self, sample_rate: int ) -> None:
        self._sample_rate = sample_rate
        self._cache: dict[ __.Path, Waveform ] = { }

    def __call__( self, path: __.Path ) -> Waveform:
        if path not in self._cache:
            self._cache[ path ] = read_wav( path, self._sample_rate )
        return self._cache[ path ]


def _calculate_gain(
    target_power: float, interference_power: float, snr_db: float
) -> float:
    return __.math.sqrt(
        target_power / interference_power * 10.0 ** ( -snr_db / 10.0 ) )


def _dump_record( record: __.cabc.Mapping[ str, __.typx.Any ] ) -> str:
    return __.json.dumps( record, sort_keys = True ) + '\n'


def _entry_to_record(
    entry: ManifestEntry, anchor: __.Path
) -> dict[ str, __.typx.Any ]:
    return {
        'kind': 'entry',
        'utterance_id': entry.utterance_id,
        'mixture_path': _relativize( entry.mixture_path, anchor ),
        'target_path': _relativize( entry.target_path, anchor ),
        'reference_path': _relativize( entry.reference_path, anchor ),
        'speaker_id': entry.speaker_id,
        'snr_db': entry.snr_db,
        'mixture_type': MixtureTypes( entry.mixture_type ).value,
        'interferer_ids': list( entry.interferer_ids ),
        'noise_snr_db': entry.noise_snr_db,
    }


def _freeze_index(
    utterances: __.cabc.Mapping[ str, __.cabc.Sequence[ __.Path ] ]
) -> SpeechIndex:
    return __.types.MappingProxyType( {
        speaker: tuple( paths )
        for speaker, paths in sorted( utterances.items( ) ) } )


def _pad_tail( samples: __.Samples, length: int ) -> __.Samples:
    deficit = length - samples.shape[ 0 ]
    if deficit <= 0: return samples
    return __.np.pad( samples, ( 0, deficit ) )


def _read_lines( path: __.Path ) -> list[ str ]:
    try: text = path.read_text( encoding = 'utf-8' )
    except OSError as exception:
        raise _exceptions.ManifestError(
            path, f"cannot read ({exception})" ) from exception
    return [
        line.strip( ) for line in text.splitlines( )
        if line.strip( ) and not line.lstrip( ).startswith( '#' ) ]


def _record_to_entry(
    record: __.cabc.Mapping[ str, __.typx.Any ],
    anchor: __.Path,
    location: __.Path,
) -> ManifestEntry:
    try:
        entry = ManifestEntry(
            utterance_id = str( record[ 'utterance_id' ] ),
            mixture_path = _resolve( anchor, record[ 'mixture_path' ] ),
            target_path = _resolve( anchor, record[ 'target_path' ] ),
            reference_path = _resolve( anchor, record[ 'reference_path' ] ),
            speaker_id = str( record[ 'speaker_id' ] ),
            snr_db = float( record[ 'snr_db' ] ),
            mixture_type = MixtureTypes( record[ 'mixture_type' ] ),
            interferer_ids = tuple( record.get( 'interferer_ids', ( ) ) ),
            noise_snr_db = record.get( 'noise_snr_db' ) )
    except ( KeyError, ValueError, TypeError ) as exception:
        raise _exceptions.ManifestError(
            location, f"malformed entry ({exception!r})" ) from exception
    paths = ( entry.mixture_path, entry.target_path, entry.reference_path )
    for path in paths:
        if not path.is_file( ):
            raise _exceptions.ManifestError(
                location, f"unresolvable path {str( path )!r}" )
    return entry


def _relativize( path: __.Path, anchor: __.Path ) -> str:
    resolved = path.resolve( )
    if resolved.is_relative_to( anchor ):
        return resolved.relative_to( anchor ).as_posix( )
    return resolved.as_posix( )


def _require_power( waveform: Waveform, subject: str ) -> float:
    power = measure_power( waveform )
    if power <= 0.0: raise _exceptions.SilentSignalError( subject )
    return power


def _require_same_rate( first: Waveform, second: Waveform ) -> None:
    if first.sample_rate != second.sample_rate:
        raise _exceptions.SampleRateMismatchError(
            first.sample_rate, second.sample_rate, 'mixture component' )


def _require_usable_index( speech_index: SpeechIndex ) -> None:
    eligible = [
        speaker for speaker, paths in speech_index.items( )
        if len( paths ) >= 2 ] # noqa: PLR2004
    if len( eligible ) < 2: # noqa: PLR2004
        raise _exceptions.CorpusInsufficiencyError(
            'need at least 2 speakers with at least 2 utterances each' )


def _resolve( anchor: __.Path, location: str ) -> __.Path:
    path = __.Path( location )
    if not path.is_absolute( ): path = anchor / path
    return path.resolve( )


def _simulate_entry( # noqa: PLR0913
    request: _SplitRequest,
    mixture_type: MixtureTypes,
    entry_number: int,
    speech_index: SpeechIndex,
    noise_index: __.cabc.Sequence[ __.Path ],
    config: SimulationConfig,
    reader: _WaveformCache,
) -> ManifestEntry:
    generator = __.np.random.default_rng(
        ( request.seed, request.split_number, entry_number ) )
    speakers = request.speakers
    targets = [
        s for s in speakers
        if len( speech_index[ s ] ) >= 2 ] # noqa: PLR2004
    target_speaker = targets[ int( generator.integers( len( targets ) ) ) ]
    target_number, reference_number = (
        int( n ) for n in generator.choice(
            len( speech_index[ target_speaker ] ), size = 2,
            replace = False ) )
    others = [ s for s in speakers if s != target_speaker ]
    interferers_count = (
        2 if mixture_type is MixtureTypes.ThreeSpeakers else 1 )
    interferer_speakers = [
        others[ int( n ) ] for n in generator.choice(
            len( others ), size = interferers_count, replace = False ) ]

    def produce_utterance( speaker: str, number: int ) -> Utterance:
        path = speech_index[ speaker ][ number ]
        return Utterance( speaker, str( path ), reader( path ) )

    target = produce_utterance( target_speaker, target_number )
    reference = produce_utterance( target_speaker, reference_number )
    interferers = [
        produce_utterance(
            speaker,
            int( generator.integers( len( speech_index[ speaker ] ) ) ) )
        for speaker in interferer_speakers ]
    snr_db = float( generator.uniform( *config.snr_range_db ) )
    noise_snr_db: float | None = None
    match mixture_type:
        case MixtureTypes.TwoSpeakers:
            example = make_2mix( target, interferers[ 0 ], reference, snr_db )
        case MixtureTypes.ThreeSpeakers:
            example = make_3mix(
                target, interferers[ 0 ], interferers[ 1 ], reference, snr_db )
        case MixtureTypes.NoisyTwoSpeakers:
            noise_path = noise_index[
                int( generator.integers( len( noise_index ) ) ) ]
            noise_snr_db = float(
                generator.uniform( *config.noise_snr_range_db ) )
            example = make_noisymix(
                target, interferers[ 0 ], reader( noise_path ), reference,
                snr_db, noise_snr_db,
                noise_fit = NoiseFitPolicies( config.noise_fit ),
                noise_offset = int( generator.integers( 2 ** 31 ) ) )
    identifier = f"{request.split}-{mixture_type.value}-{entry_number:06d}"
    folder = request.destination / request.split / mixture_type.value
    mixture_path = folder / f"{identifier}-mixture.wav"
    target_path = folder / f"{identifier}-target.wav"
    write_wav( mixture_path, example.mixture )
    write_wav( target_path, example.target )
    return ManifestEntry(
        utterance_id = identifier,
        mixture_path = mixture_path,
        target_path = target_path,
        reference_path = speech_index[ target_speaker ][ reference_number ],
        speaker_id = target_speaker,
        snr_db = snr_db,
        mixture_type = mixture_type,
        interferer_ids = example.interferer_ids,
        noise_snr_db = noise_snr_db )


def _simulate_split(
    request: _SplitRequest,
    speech_index: SpeechIndex,
    noise_index: __.cabc.Sequence[ __.Path ],
    config: SimulationConfig,
    reader: _WaveformCache,
) -> list[ ManifestEntry ]:
    counts = config.counts.get( request.split, { } )
    speakers = request.speakers
    targets = [
        s for s in speakers
        if len( speech_index[ s ] ) >= 2 ] # noqa: PLR2004
    entries: list[ ManifestEntry ] = [ ]
    for mixture_type in MixtureTypes:
        count = counts.get( mixture_type.value, 0 )
        if not count: continue
        needed = 3 if mixture_type is MixtureTypes.ThreeSpeakers else 2
        if len( speakers ) < needed or not targets:
            raise _exceptions.CorpusInsufficiencyError(
                f"{mixture_type.value} for split {request.split!r} needs "
                f"{needed} speakers and a speaker with 2 utterances; "
                f"have {len( speakers )}" )
        if mixture_type is MixtureTypes.NoisyTwoSpeakers and not noise_index:
            raise _exceptions.CorpusInsufficiencyError(
                'noisy mixtures requested without noise recordings' )
        base = len( entries )
        entries.extend(
            _simulate_entry(
                request, mixture_type, base + offset,
                speech_index, noise_index, config, reader )
            for offset in range( count ) )
    return entries


def _sum_waveforms( waveforms: __.cabc.Sequence[ Waveform ] ) -> Waveform:
    length = max( len( waveform ) for waveform in waveforms )
    total = __.np.zeros( length, dtype = __.np.float64 )
    for waveform in waveforms:
        total[ : len( waveform ) ] += waveform.samples
    return Waveform( total, waveforms[ 0 ].sample_rate )


def _validate_speakers(
    target: Utterance,
    interferers: __.cabc.Sequence[ Utterance ],
    reference: Utterance,
) -> None:
    if reference.speaker_id != target.speaker_id:
        raise _exceptions.SpeakerIdentityError(
            f"reference speaker {reference.speaker_id!r} differs from "
            f"target speaker {target.speaker_id!r}" )
    if reference.utterance_id == target.utterance_id:
        raise _exceptions.SpeakerIdentityError(
            f"reference reuses target utterance {target.utterance_id!r}" )
    speakers = [ interferer.speaker_id for interferer in interferers ]
    if target.speaker_id in speakers:
        raise _exceptions.SpeakerIdentityError(
            f"target speaker {target.speaker_id!r} among interferers" )
    if len( set( speakers ) ) != len( speakers ):
        raise _exceptions.SpeakerIdentityError(
            f"repeated interferer speakers {speakers!r}" )
