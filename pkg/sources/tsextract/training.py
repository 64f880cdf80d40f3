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



''' Multi-task training, model selection, checkpoints, and evaluation.

    Training draws fixed-length segments from simulated mixtures, scores
    the three decoder outputs with the multi-scale SI-SNR loss and the
    speaker head with cross-entropy, and keeps the parameters of the epoch
    with the lowest development loss.
'''


from __future__ import annotations

from . import __
from . import configuration as _configuration
from . import embedder as _embedder
from . import exceptions as _exceptions
from . import models as _models
from . import objectives as _objectives
from . import separator as _separator
from . import signals as _signals


_scribe = __.logging.getLogger( __name__ )


CHECKPOINT_FORMAT = 1
REPORT_FORMAT = 1
ROW_INPUT = 'input mixture'
ROW_SYSTEM = 'system'

_HEADER_KEYS = frozenset( (
    'architecture', 'config_hash', 'dev_loss', 'epoch', 'history', 'model',
    'numpy_rng_state', 'parameters', 'settings', 'speakers' ) )


class TrainConfig( __.ccstd.DataclassObject ):
    ''' Settings for optimization and model selection. '''

    epochs: int = 150
    early_stop_patience: int = 6
    segment_s: float = 4.0
    learning_rate: float = 1e-3
    gradient_clip_norm: float = 5.0
    batch_size: int = 8
    seed: int = 0
    threads: int = 1
    plateau_patience: int = 2
    plateau_factor: float = 0.5
    max_steps: int | None = None
    log_interval: int = 50

    def __post_init__( self ) -> None:
        def complain( reason: str ) -> __.typx.NoReturn:
            raise _exceptions.ConfigurationError( 'training', reason )

        if self.epochs < 1: complain( 'epochs must be positive' )
        if not 0 < self.early_stop_patience < self.epochs:
            complain( 'early_stop_patience must lie between 0 and epochs' )
        if self.segment_s <= 0: complain( 'segment_s must be positive' )
        if self.learning_rate <= 0:
            complain( 'learning_rate must be positive' )
        if self.gradient_clip_norm <= 0:
            complain( 'gradient_clip_norm must be positive' )
        if self.batch_size < 1: complain( 'batch_size must be positive' )
        if self.threads < 1: complain( 'threads must be positive' )
        if self.plateau_patience < 1:
            complain( 'plateau_patience must be positive' )
        if not 0 < self.plateau_factor < 1:
            complain( 'plateau_factor must lie strictly between 0 and 1' )
        if self.max_steps is not None and self.max_steps < 1:
            complain( 'max_steps must be positive' )
        if self.log_interval < 1: complain( 'log_interval must be positive' )


class EarlyStopping:
    ''' Tracks development loss and decides when training stagnates. '''

    def __init__( self, patience: int ) -> None:
        self.patience = patience
        self.best_value = __.math.inf
        self.best_epoch = 0
        self.stagnation = 0

    @property
    def should_stop( self ) -> bool:
        ''' Have enough epochs passed without improvement? '''
        return self.stagnation >= self.patience

    def update( self, epoch: int, value: float ) -> bool:
        ''' Records loss of epoch. Returns true on strict improvement. '''
        if value < self.best_value:
            self.best_value, self.best_epoch = value, epoch
            self.stagnation = 0
            return True
        self.stagnation += 1
        return False

    def capture( self ) -> dict[ str, __.typx.Any ]:
        ''' Progress as JSON-ready mapping. '''
        return {
            'best_value': self.best_value,
            'best_epoch': self.best_epoch,
            'stagnation': self.stagnation,
        }

    def restore( self, progress: __.cabc.Mapping[ str, __.typx.Any ] ) -> None:
        ''' Resumes progress captured by :meth:`capture`. '''
        self.best_value = float( progress[ 'best_value' ] )
        self.best_epoch = int( progress[ 'best_epoch' ] )
        self.stagnation = int( progress[ 'stagnation' ] )


class Batch( __.typx.NamedTuple ):
    ''' Collated segments; references cropped to a shared length. '''

    mixture: __.Tensor
    target: __.Tensor
    reference: __.Tensor
    labels: __.Tensor


@__.dcls.dataclass( frozen = True, eq = False )
class TrainingExample:
    ''' Audio of one manifest entry, ready for cropping. '''

    utterance_id: str
    mixture: __.Samples
    target: __.Samples
    reference: __.Samples
    label: int
    active_length: int


class ExamplePool:
    ''' In-memory examples with segment cropping and batching. '''

    def __init__(
        self,
        examples: __.cabc.Sequence[ TrainingExample ],
        segment_length: __.typx.Annotated[
            int, __.ddoc.Doc( ''' Samples per training segment. ''' )
        ],
    ) -> None:
        self.examples = tuple( examples )
        self.segment_length = segment_length

    def __len__( self ) -> int: return len( self.examples )

    @classmethod
    def from_manifests(
        cls,
        manifests: __.cabc.Sequence[ _signals.CorpusManifest ],
        speakers: __.typx.Annotated[
            __.cabc.Sequence[ str ],
            __.ddoc.Doc(
                ''' Speaker vocabulary; unknown speakers get -1. ''' ),
        ],
        sample_rate: int,
        segment_length: int,
    ) -> __.typx.Self:
        ''' Reads audio of all manifest entries. '''
        labels = { speaker: index for index, speaker in enumerate( speakers ) }
        examples: list[ TrainingExample ] = [ ]
        for manifest in manifests:
            for entry in manifest.entries:
                mixture = _signals.read_wav( entry.mixture_path, sample_rate )
                target = _signals.read_wav( entry.target_path, sample_rate )
                reference = _signals.read_wav(
                    entry.reference_path, sample_rate )
                examples.append( TrainingExample(
                    utterance_id = entry.utterance_id,
                    mixture = mixture.samples.astype( __.np.float32 ),
                    target = target.padded( len( mixture ) ).samples[
                        : len( mixture ) ].astype( __.np.float32 ),
                    reference = reference.samples.astype( __.np.float32 ),
                    label = labels.get( entry.speaker_id, -1 ),
                    active_length = min( len( target ), len( mixture ) ) ) )
        return cls( examples, segment_length )

    def iterate_batches(
        self,
        batch_size: int,
        generator: __.typx.Annotated[
            __.np.random.Generator | None,
            __.ddoc.Doc(
                ''' Source of order and crops; none means fixed. ''' ),
        ] = None,
    ) -> __.cabc.Iterator[ Batch ]:
        ''' Batches over all examples, shuffled and randomly cropped if a
            generator is supplied, else in order with leading crops.
        '''
        order = (
            __.np.arange( len( self.examples ) ) if generator is None
            else generator.permutation( len( self.examples ) ) )
        for start in range( 0, len( order ), batch_size ):
            selection = order[ start : start + batch_size ]
            yield self._collate( [
                self._crop( self.examples[ int( index ) ], generator )
                for index in selection ] )

    def _crop(
        self,
        example: TrainingExample,
        generator: __.np.random.Generator | None,
    ) -> tuple[ __.Samples, __.Samples, __.Samples, int ]:
        size = self.segment_length
        mixture, target = example.mixture, example.target
        if len( mixture ) <= size:
            mixture = _pad_samples( mixture, size )
            target = _pad_samples( target, size )
        else:
            start = _choose_start(
                min( example.active_length, len( mixture ) ) - size,
                generator )
            mixture = mixture[ start : start + size ]
            target = target[ start : start + size ]
        reference = example.reference
        if len( reference ) > size:
            start = _choose_start( len( reference ) - size, generator )
            reference = reference[ start : start + size ]
        return mixture, target, reference, example.label

    @staticmethod
    def _collate(
        items: __.cabc.Sequence[
            tuple[ __.Samples, __.Samples, __.Samples, int ] ],
    ) -> Batch:
        shortest = min( len( item[ 2 ] ) for item in items )
        return Batch(
            mixture = __.torch.from_numpy(
                __.np.stack( [ item[ 0 ] for item in items ] ) ),
            target = __.torch.from_numpy(
                __.np.stack( [ item[ 1 ] for item in items ] ) ),
            reference = __.torch.from_numpy(
                __.np.stack( [ item[ 2 ][ : shortest ] for item in items ] ) ),
            labels = __.torch.tensor(
                [ item[ 3 ] for item in items ], dtype = __.torch.long ) )


@__.dcls.dataclass( frozen = True, eq = False )
class TrainingState:
    ''' Optimization state after the last completed epoch.

        Parameters here are those of the last epoch, which need not be the
        best one. Optimizer tensors are keyed ``<parameter index>/<slot>``.
    '''

    epoch: int
    step: int
    parameters: __.cabc.Mapping[ str, __.Samples ]
    optimizer_groups: tuple[ __.cabc.Mapping[ str, __.typx.Any ], ... ]
    optimizer_slots: __.cabc.Mapping[ str, __.Samples ]
    scheduler: __.cabc.Mapping[ str, __.typx.Any ]
    stopper: __.cabc.Mapping[ str, __.typx.Any ]


@__.dcls.dataclass( frozen = True, eq = False )
class ModelCheckpoint:
    ''' Trained parameters with the configuration and state that made them. '''

    model_config: _models.ModelConfig
    parameters: __.cabc.Mapping[ str, __.Samples ]
    speakers: tuple[ str, ... ]
    epoch: int
    dev_loss: float
    config_hash: str
    settings: __.cabc.Mapping[ str, __.typx.Any ]
    history: tuple[ __.cabc.Mapping[ str, __.typx.Any ], ... ]
    numpy_rng_state: __.cabc.Mapping[ str, __.typx.Any ]
    torch_rng_state: __.Samples
    training_state: TrainingState | None = None

    @property
    def architecture( self ) -> str:
        ''' Name of separator trunk. '''
        return self.model_config.architecture


def assess_speaker_accuracy(
    model: _models.TargetExtractor,
    pool: ExamplePool,
) -> float:
    ''' Speaker head accuracy on full references of labelled examples. '''
    model.eval( )
    labelled = [ example for example in pool.examples if example.label >= 0 ]
    if not labelled: return 0.0
    logits: list[ __.Tensor ] = [ ]
    with __.torch.no_grad( ):
        for example in labelled:
            reference = __.torch.from_numpy( example.reference ).unsqueeze( 0 )
            logits.append( model.speaker_head( model.embed( reference ) ) )
    labels = __.torch.tensor( [ example.label for example in labelled ] )
    return _embedder.speaker_accuracy( __.torch.cat( logits ), labels )


def calculate_dev_loss(
    model: _models.TargetExtractor,
    pool: ExamplePool,
    batch_size: int,
    weights: _objectives.LossWeights,
) -> float:
    ''' Mean multi-scale SI-SNR loss over fixed crops of pool. '''
    model.eval( )
    total, count = 0.0, 0
    with __.torch.no_grad( ):
        for batch in pool.iterate_batches( batch_size ):
            output = model( batch.mixture, batch.reference )
            loss = _objectives.multiscale_si_snr_loss(
                output.estimates, batch.target, weights )
            size = batch.mixture.shape[ 0 ]
            total += float( loss.item( ) ) * size
            count += size
    return total / count


def clip_gradients(
    parameters: __.cabc.Iterable[ __.nn.Parameter ], max_norm: float
) -> float:
    ''' Rescales gradients to global norm bound. Returns norm before. '''
    norm = __.nn.utils.clip_grad_norm_( list( parameters ), max_norm )
    return float( norm.item( ) )


def produce_scheduler(
    optimizer: __.torch.optim.Optimizer, train_config: TrainConfig
) -> __.torch.optim.lr_scheduler.ReduceLROnPlateau:
    ''' Learning rate schedule driven by development loss.

        Scales the rate by ``plateau_factor`` once ``plateau_patience``
        consecutive epochs fail to improve on the best loss so far.
    '''
    # Scheduler reduces only after more than its patience of bad epochs.
    return __.torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode = 'min',
        factor = train_config.plateau_factor,
        patience = train_config.plateau_patience - 1 )


def train( # noqa: PLR0912,PLR0913,PLR0915
    train_manifests: __.typx.Annotated[
        __.cabc.Sequence[ _signals.CorpusManifest ],
        __.ddoc.Doc( ''' Training manifests, concatenated when several. ''' ),
    ],
    dev_manifest: _signals.CorpusManifest,
    model_config: _models.ModelConfig,
    train_config: TrainConfig,
    loss_weights: _objectives.LossWeights,
    config_hash: __.typx.Annotated[
        __.Absential[ str ],
        __.ddoc.Doc( ''' Digest of run configuration; derived if absent. ''' ),
    ] = __.absent,
    dump_directory: __.typx.Annotated[
        __.Absential[ __.PathLike ],
        __.ddoc.Doc( ''' Where to write batches with non-finite loss. ''' ),
    ] = __.absent,
    resume: __.typx.Annotated[
        __.Absential[ ModelCheckpoint ],
        __.ddoc.Doc( ''' Checkpoint with training state to continue. ''' ),
    ] = __.absent,
) -> ModelCheckpoint:
    ''' Trains embedder and separator jointly.

        Runs until ``epochs`` epochs, ``max_steps`` steps, or
        ``early_stop_patience`` epochs without development loss
        improvement, whichever comes first. Returns parameters of the best
        development epoch. Results are reproducible for a fixed seed and
        thread count; a resumed run continues exactly where the interrupted
        one stopped.
    '''
    settings = {
        'model': _configuration.record_to_mapping( model_config ),
        'objectives': _configuration.record_to_mapping( loss_weights ),
        'training': _configuration.record_to_mapping( train_config ),
    }
    if __.is_absent( config_hash ):
        config_hash = _configuration.calculate_digest( settings )
    _seed_everything( train_config )
    rate = model_config.frontend.sample_rate
    segment_length = round( train_config.segment_s * rate )
    speakers = _collect_speakers( train_manifests )
    pool = ExamplePool.from_manifests(
        train_manifests, speakers, rate, segment_length )
    dev_pool = ExamplePool.from_manifests(
        ( dev_manifest, ), speakers, rate, segment_length )
    if not len( pool ) or not len( dev_pool ):
        raise _exceptions.ManifestError(
            'train' if not len( pool ) else 'dev',
            'no entries to train or select with' )
    model = _models.TargetExtractor( model_config, len( speakers ) )
    _scribe.info(
        'Training %s with %d parameters on %d mixtures of %d speakers.',
        model_config.architecture, _separator.count_parameters( model ),
        len( pool ), len( speakers ) )
    optimizer = __.torch.optim.Adam(
        model.parameters( ), lr = train_config.learning_rate )
    scheduler = produce_scheduler( optimizer, train_config )
    stopper = EarlyStopping( train_config.early_stop_patience )
    generator = __.np.random.default_rng( train_config.seed )
    dumps = (
        __.Path( ) if __.is_absent( dump_directory )
        else __.Path( dump_directory ) )
    best_state = _copy_state( model )
    history: list[ dict[ str, __.typx.Any ] ] = [ ]
    step = epoch = 0
    if not __.is_absent( resume ):
        state = _require_resumable( resume, model_config, speakers )
        _restore_training( state, model, optimizer, scheduler, stopper )
        generator.bit_generator.state = dict( resume.numpy_rng_state )
        __.torch.set_rng_state(
            __.torch.from_numpy( __.np.array( resume.torch_rng_state ) ) )
        step, epoch = state.step, state.epoch
        best_state = _import_state( resume.parameters )
        history.extend( dict( entry ) for entry in resume.history )
        _scribe.info( 'Resuming after epoch %d, step %d.', epoch, step )
    epochs = range( epoch + 1, train_config.epochs + 1 )
    if stopper.should_stop or _reached_limit( train_config, step ):
        epochs = range( 0 )
    for epoch in epochs:
        model.train( )
        losses: list[ float ] = [ ]
        for batch in pool.iterate_batches(
            train_config.batch_size, generator
        ):
            step += 1
            output = model( batch.mixture, batch.reference )
            terms = _objectives.calculate_multitask_terms(
                output.estimates, batch.target, output.logits,
                batch.labels, loss_weights )
            if not bool( __.torch.isfinite( terms.total ) ):
                raise _exceptions.NonFiniteLossError(
                    step, _dump_batch( batch, dumps, step ) )
            optimizer.zero_grad( )
            terms.total.backward( )
            clip_gradients(
                model.parameters( ), train_config.gradient_clip_norm )
            optimizer.step( )
            losses.append( float( terms.total.item( ) ) )
            if 0 == step % train_config.log_interval:
                _scribe.debug(
                    'Step %d: loss %.4f (separation %.4f, speaker %.4f).',
                    step, losses[ -1 ], float( terms.separation.item( ) ),
                    float( terms.classification.item( ) ) )
            if _reached_limit( train_config, step ): break
        dev_loss = calculate_dev_loss(
            model, dev_pool, train_config.batch_size, loss_weights )
        learning_rate = float( optimizer.param_groups[ 0 ][ 'lr' ] )
        scheduler.step( dev_loss )
        if stopper.update( epoch, dev_loss ): best_state = _copy_state( model )
        history.append( {
            'epoch': epoch,
            'steps': step,
            'train_loss': sum( losses ) / len( losses ),
            'first_step_loss': losses[ 0 ],
            'last_step_loss': losses[ -1 ],
            'dev_loss': dev_loss,
            'learning_rate': learning_rate,
        } )
        _scribe.info(
            'Epoch %d: train loss %.4f, dev loss %.4f, learning rate %.2e.',
            epoch, history[ -1 ][ 'train_loss' ], dev_loss, learning_rate )
        if stopper.should_stop:
            _scribe.info(
                'Stopping early after epoch %d; best epoch %d.',
                epoch, stopper.best_epoch )
            break
        if _reached_limit( train_config, step ): break
    training_state = _capture_training(
        epoch, step, model, optimizer, scheduler, stopper )
    model.load_state_dict( best_state )
    return ModelCheckpoint(
        model_config = model_config,
        parameters = _export_state( model ),
        speakers = tuple( speakers ),
        epoch = stopper.best_epoch,
        dev_loss = stopper.best_value,
        config_hash = config_hash,
        settings = settings,
        history = tuple( history ),
        numpy_rng_state = generator.bit_generator.state,
        torch_rng_state = __.torch.get_rng_state( ).numpy( ).copy( ),
        training_state = training_state )


def produce_model( checkpoint: ModelCheckpoint ) -> _models.TargetExtractor:
    ''' Rebuilds model and loads checkpoint parameters into it. '''
    model = _models.TargetExtractor(
        checkpoint.model_config, len( checkpoint.speakers ) )
    _load_parameters( model, checkpoint.parameters )
    model.eval( )
    return model


def save_checkpoint(
    checkpoint: ModelCheckpoint, location: __.PathLike
) -> None:
    ''' Writes checkpoint as ZIP archive.

        ``header.json`` holds configuration and provenance. Every named
        parameter or buffer is a little-endian NumPy ``.npy`` entry under
        ``parameters/``; the torch RNG state is ``state/torch_rng.npy``.
        Training state, when present, adds last-epoch parameters under
        ``state/parameters/`` and optimizer slots under
        ``state/optimizer/``.
    '''
    path = __.Path( location )
    path.parent.mkdir( parents = True, exist_ok = True )
    header = {
        'format': CHECKPOINT_FORMAT,
        'architecture': checkpoint.architecture,
        'config_hash': checkpoint.config_hash,
        'model': _configuration.record_to_mapping( checkpoint.model_config ),
        'settings': checkpoint.settings,
        'epoch': checkpoint.epoch,
        'dev_loss': checkpoint.dev_loss,
        'speakers': list( checkpoint.speakers ),
        'history': list( checkpoint.history ),
        'numpy_rng_state': checkpoint.numpy_rng_state,
        'parameters': list( checkpoint.parameters ),
    }
    if checkpoint.training_state is not None:
        header[ 'training_state' ] = _describe_training(
            checkpoint.training_state )
    with __.zipfile.ZipFile(
        path, 'w', compression = __.zipfile.ZIP_DEFLATED
    ) as archive:
        archive.writestr(
            'header.json',
            __.json.dumps( header, indent = 2, sort_keys = True ) )
        for name, array in checkpoint.parameters.items( ):
            archive.writestr(
                f"parameters/{name}.npy", _encode_array( array ) )
        archive.writestr(
            'state/torch_rng.npy',
            _encode_array( checkpoint.torch_rng_state ) )
        if checkpoint.training_state is not None:
            _write_training( archive, checkpoint.training_state )
    _scribe.info(
        'Saved checkpoint of epoch %d to %s.', checkpoint.epoch, path )


def load_checkpoint(
    location: __.PathLike,
    expected: __.typx.Annotated[
        __.Absential[ _models.ModelConfig ],
        __.ddoc.Doc( ''' Model configuration the checkpoint must match. ''' ),
    ] = __.absent,
) -> ModelCheckpoint:
    ''' Reads checkpoint archive written by :func:`save_checkpoint`. '''
    path = __.Path( location )
    try:
        with __.zipfile.ZipFile( path ) as archive:
            header = __.json.loads( archive.read( 'header.json' ) )
            if CHECKPOINT_FORMAT != header.get( 'format' ):
                raise _exceptions.CheckpointError(
                    path, f"unsupported format {header.get( 'format' )!r}" )
            missing = _HEADER_KEYS - set( header )
            if missing:
                raise _exceptions.CheckpointError(
                    path, f"header lacks {', '.join( sorted( missing ) )}" )
            parameters = {
                name: _decode_array(
                    archive.read( f"parameters/{name}.npy" ) )
                for name in header[ 'parameters' ] }
            torch_rng_state = _decode_array(
                archive.read( 'state/torch_rng.npy' ) )
            training_state = (
                _read_training( archive, header[ 'training_state' ] )
                if 'training_state' in header else None )
    except (
        OSError, KeyError, ValueError, __.zipfile.BadZipFile
    ) as exception:
        if isinstance( exception, _exceptions.Omnierror ): raise
        raise _exceptions.CheckpointError(
            path, str( exception ) ) from exception
    try: model_config = _models.produce_model_config( header[ 'model' ] )
    except _exceptions.ConfigurationError as exception:
        raise _exceptions.CheckpointError(
            path, f"invalid model configuration ({exception})" ) from exception
    if header[ 'architecture' ] != model_config.architecture:
        raise _exceptions.CheckpointError(
            path, 'architecture in header disagrees with configuration' )
    if not __.is_absent( expected ) and expected != model_config:
        raise _exceptions.CheckpointError(
            path,
            f"checkpoint holds {model_config.architecture} model "
            f"differing from configured {expected.architecture} model" )
    return ModelCheckpoint(
        model_config = model_config,
        parameters = parameters,
        speakers = tuple( header[ 'speakers' ] ),
        epoch = int( header[ 'epoch' ] ),
        dev_loss = float( header[ 'dev_loss' ] ),
        config_hash = str( header[ 'config_hash' ] ),
        settings = header[ 'settings' ],
        history = tuple( header[ 'history' ] ),
        numpy_rng_state = header[ 'numpy_rng_state' ],
        torch_rng_state = torch_rng_state,
        training_state = training_state )


def extract(
    model: __.typx.Annotated[
        _models.TargetExtractor | ModelCheckpoint,
        __.ddoc.Doc( ''' Trained model or checkpoint to build it from. ''' ),
    ],
    mixture: _signals.Waveform,
    reference: __.typx.Annotated[
        _signals.Waveform,
        __.ddoc.Doc(
            ''' Enrollment speech of target speaker, used whole. ''' ),
    ],
) -> _signals.Waveform:
    ''' Estimates target speech of exactly the mixture length. '''
    if isinstance( model, ModelCheckpoint ): model = produce_model( model )
    rate = model.config.frontend.sample_rate
    for subject, waveform in (
        ( 'mixture', mixture ), ( 'reference', reference )
    ):
        if waveform.sample_rate != rate:
            raise _exceptions.SampleRateMismatchError(
                rate, waveform.sample_rate, subject )
    model.eval( )
    with __.torch.no_grad( ):
        estimate = model.extract(
            _as_batch( mixture ), _as_batch( reference ) )
    return _signals.Waveform( estimate[ 0 ].numpy( ), rate )


@__.dcls.dataclass( frozen = True )
class UtteranceScore:
    ''' SI-SDR of system output and of unprocessed mixture for one entry. '''

    utterance_id: str
    mixture_type: str
    si_sdr_db: float
    input_si_sdr_db: float

    @property
    def improvement_db( self ) -> float:
        ''' Gain of system output over unprocessed mixture. '''
        return self.si_sdr_db - self.input_si_sdr_db


@__.dcls.dataclass( frozen = True )
class SummaryRow:
    ''' Mean scores of one row for one mixture type. '''

    mixture_type: str
    row: str
    count: int
    mean_si_sdr_db: float
    mean_si_sdr_improvement_db: float


@__.dcls.dataclass( frozen = True, eq = False )
class EvaluationReport:
    ''' Scores of every evaluated utterance plus provenance. '''

    config_hash: str
    manifest: str
    scores: tuple[ UtteranceScore, ... ]

    def summarize( self ) -> tuple[ SummaryRow, ... ]:
        ''' Input mixture and system rows per mixture type. '''
        rows: list[ SummaryRow ] = [ ]
        types = sorted( { score.mixture_type for score in self.scores } )
        for mixture_type in types:
            scores = [
                score for score in self.scores
                if score.mixture_type == mixture_type ]
            inputs = float( __.np.mean(
                [ score.input_si_sdr_db for score in scores ] ) )
            outputs = float( __.np.mean(
                [ score.si_sdr_db for score in scores ] ) )
            rows.append( SummaryRow(
                mixture_type, ROW_INPUT, len( scores ), inputs, 0.0 ) )
            rows.append( SummaryRow(
                mixture_type, ROW_SYSTEM, len( scores ), outputs,
                outputs - inputs ) )
        return tuple( rows )

    def render( self ) -> str:
        ''' JSON Lines: header, one record per utterance, summary rows.

            Summary means are strings with two decimals.
        '''
        records: list[ dict[ str, __.typx.Any ] ] = [ {
            'kind': 'header',
            'format': REPORT_FORMAT,
            'config_hash': self.config_hash,
            'manifest': self.manifest,
            'scored_output': 'shortest-scale estimate',
        } ]
        records.extend( {
            'kind': 'utterance',
            'utterance_id': score.utterance_id,
            'mixture_type': score.mixture_type,
            'si_sdr_db': score.si_sdr_db,
            'input_si_sdr_db': score.input_si_sdr_db,
            'si_sdr_improvement_db': score.improvement_db,
        } for score in self.scores )
        records.extend( {
            'kind': 'summary',
            'mixture_type': row.mixture_type,
            'row': row.row,
            'count': row.count,
            'mean_si_sdr_db': f"{row.mean_si_sdr_db:.2f}",
            'mean_si_sdr_improvement_db':
                f"{row.mean_si_sdr_improvement_db:.2f}",
        } for row in self.summarize( ) )
        return ''.join(
            __.json.dumps( record, sort_keys = True ) + '\n'
            for record in records )


Extraction: __.typx.TypeAlias = __.cabc.Callable[
    [ _signals.ManifestEntry, _signals.Waveform, _signals.Waveform ],
    _signals.Waveform ]


def evaluate_with(
    extraction: __.typx.Annotated[
        Extraction,
        __.ddoc.Doc(
            ''' Produces estimate from entry, mixture, reference. ''' ),
    ],
    manifest: _signals.CorpusManifest,
    config_hash: str = '',
    manifest_label: __.typx.Annotated[
        str, __.ddoc.Doc( ''' Name of manifest recorded in report. ''' )
    ] = '',
) -> EvaluationReport:
    ''' Scores extraction on every manifest entry. '''
    if not manifest.entries:
        raise _exceptions.ManifestError(
            manifest_label or manifest.split, 'no entries to evaluate' )
    scores: list[ UtteranceScore ] = [ ]
    for entry in manifest.entries:
        mixture = _signals.read_wav( entry.mixture_path )
        target = _signals.read_wav( entry.target_path )
        reference = _signals.read_wav( entry.reference_path )
        target = _signals.Waveform(
            target.padded( len( mixture ) ).samples[ : len( mixture ) ],
            target.sample_rate )
        estimate = extraction( entry, mixture, reference )
        scores.append( UtteranceScore(
            utterance_id = entry.utterance_id,
            mixture_type = entry.mixture_type.value,
            si_sdr_db = _objectives.measure_si_sdr( estimate, target ),
            input_si_sdr_db = _objectives.measure_si_sdr( mixture, target ) ) )
    report = EvaluationReport(
        config_hash = config_hash,
        manifest = manifest_label or manifest.split,
        scores = tuple( scores ) )
    for row in report.summarize( ):
        _scribe.info(
            '%s %s: mean SI-SDR %.2f dB over %d utterances.',
            row.mixture_type, row.row, row.mean_si_sdr_db, row.count )
    return report


def evaluate(
    checkpoint: ModelCheckpoint,
    manifest: _signals.CorpusManifest,
    manifest_label: str = '',
) -> EvaluationReport:
    ''' Scores checkpoint model on test manifest. '''
    model = produce_model( checkpoint )

    def extraction(
        entry: _signals.ManifestEntry,
        mixture: _signals.Waveform,
        reference: _signals.Waveform,
    ) -> _signals.Waveform:
        return extract( model, mixture, reference )

    return evaluate_with(
        extraction, manifest,
        config_hash = checkpoint.config_hash,
        manifest_label = manifest_label )


def save_report( report: EvaluationReport, location: __.PathLike ) -> None:
    ''' Writes rendered report. '''
    path = __.Path( location )
    path.parent.mkdir( parents = True, exist_ok = True )
    path.write_text( report.render( ), encoding = 'utf-8' )


def _as_batch( waveform: _signals.Waveform ) -> __.Tensor:
    samples = waveform.samples.astype( __.np.float32 )
    return __.torch.from_numpy( samples ).unsqueeze( 0 )


def _capture_training( # noqa: PLR0913
    epoch: int,
    step: int,
    model: __.nn.Module,
    optimizer: __.torch.optim.Optimizer,
    scheduler: __.torch.optim.lr_scheduler.ReduceLROnPlateau,
    stopper: EarlyStopping,
) -> TrainingState:
    optimizer_state = optimizer.state_dict( )
    slots: dict[ str, __.Samples ] = { }
    for index, entries in optimizer_state[ 'state' ].items( ):
        for slot, value in entries.items( ):
            slots[ f"{index}/{slot}" ] = (
                __.torch.as_tensor( value ).detach( ).cpu( ).numpy( ).copy( ) )
    return TrainingState(
        epoch = epoch,
        step = step,
        parameters = _export_state( model ),
        optimizer_groups = tuple(
            dict( group ) for group in optimizer_state[ 'param_groups' ] ),
        optimizer_slots = slots,
        scheduler = dict( scheduler.state_dict( ) ),
        stopper = stopper.capture( ) )


def _choose_start(
    span: int, generator: __.np.random.Generator | None
) -> int:
    if span <= 0 or generator is None: return 0
    return int( generator.integers( 0, span + 1 ) )


def _collect_speakers(
    manifests: __.cabc.Sequence[ _signals.CorpusManifest ]
) -> list[ str ]:
    speakers = sorted( {
        entry.speaker_id
        for manifest in manifests for entry in manifest.entries } )
    if len( speakers ) < 2: # noqa: PLR2004
        raise _exceptions.CorpusInsufficiencyError(
            f"speaker head needs at least 2 target speakers, "
            f"training manifests have {len( speakers )}" )
    return speakers


def _copy_state(
    model: __.nn.Module
) -> dict[ str, __.Tensor ]:
    return {
        name: tensor.detach( ).clone( )
        for name, tensor in model.state_dict( ).items( ) }


def _decode_array( data: bytes ) -> __.Samples:
    return __.np.lib.format.read_array(
        __.io.BytesIO( data ), allow_pickle = False )


def _describe_training( state: TrainingState ) -> dict[ str, __.typx.Any ]:
    return {
        'epoch': state.epoch,
        'step': state.step,
        'parameters': list( state.parameters ),
        'optimizer_groups': [
            dict( group ) for group in state.optimizer_groups ],
        'optimizer_slots': list( state.optimizer_slots ),
        'scheduler': dict( state.scheduler ),
        'stopper': dict( state.stopper ),
    }


def _dump_batch( batch: Batch, directory: __.Path, step: int ) -> __.Path:
    directory.mkdir( parents = True, exist_ok = True )
    path = directory / f"nonfinite-batch-{step:06d}.npz"
    __.np.savez(
        path, **{ name: tensor.numpy( )
                  for name, tensor in batch._asdict( ).items( ) } )
    _scribe.error(
        'Non-finite loss at step %d; batch dumped to %s.', step, path )
    return path


def _encode_array( array: __.Samples ) -> bytes:
    array = __.np.require( array, requirements = 'C' )
    array = array.astype( array.dtype.newbyteorder( '<' ), copy = False )
    buffer = __.io.BytesIO( )
    __.np.lib.format.write_array( buffer, array, allow_pickle = False )
    return buffer.getvalue( )


def _export_state( model: __.nn.Module ) -> dict[ str, __.Samples ]:
    return {
        name: tensor.detach( ).cpu( ).numpy( ).copy( )
        for name, tensor in model.state_dict( ).items( ) }


def _import_state(
    arrays: __.cabc.Mapping[ str, __.Samples ]
) -> dict[ str, __.Tensor ]:
    return {
        name: __.torch.from_numpy( __.np.array( array ) )
        for name, array in arrays.items( ) }


def _load_parameters(
    model: __.nn.Module, arrays: __.cabc.Mapping[ str, __.Samples ]
) -> None:
    state = _import_state( arrays )
    for name, tensor in model.state_dict( ).items( ):
        if name not in state or state[ name ].shape == tensor.shape: continue
        raise _exceptions.CheckpointError(
            '<checkpoint>',
            f"parameter {name} has shape {tuple( state[ name ].shape )}, "
            f"model expects {tuple( tensor.shape )}" )
    try: model.load_state_dict( state, strict = True )
    except RuntimeError as exception:
        raise _exceptions.CheckpointError(
            '<checkpoint>', str( exception ) ) from exception


def _pad_samples( samples: __.Samples, length: int ) -> __.Samples:
    return __.np.pad( samples, ( 0, length - len( samples ) ) )


def _read_training(
    archive: __.zipfile.ZipFile,
    description: __.cabc.Mapping[ str, __.typx.Any ],
) -> TrainingState:
    return TrainingState(
        epoch = int( description[ 'epoch' ] ),
        step = int( description[ 'step' ] ),
        parameters = {
            name: _decode_array(
                archive.read( f"state/parameters/{name}.npy" ) )
            for name in description[ 'parameters' ] },
        optimizer_groups = tuple( description[ 'optimizer_groups' ] ),
        optimizer_slots = {
            name: _decode_array(
                archive.read( f"state/optimizer/{name}.npy" ) )
            for name in description[ 'optimizer_slots' ] },
        scheduler = description[ 'scheduler' ],
        stopper = description[ 'stopper' ] )


def _reached_limit( config: TrainConfig, step: int ) -> bool:
    return config.max_steps is not None and step >= config.max_steps


def _require_resumable(
    checkpoint: ModelCheckpoint,
    model_config: _models.ModelConfig,
    speakers: __.cabc.Sequence[ str ],
) -> TrainingState:
    state = checkpoint.training_state
    if state is None:
        raise _exceptions.CheckpointError(
            '<checkpoint>', 'holds no training state to resume' )
    if checkpoint.model_config != model_config:
        raise _exceptions.CheckpointError(
            '<checkpoint>',
            f"holds {checkpoint.architecture} model differing from "
            f"configured {model_config.architecture} model" )
    if tuple( speakers ) != checkpoint.speakers:
        raise _exceptions.CheckpointError(
            '<checkpoint>', 'speakers differ from training manifests' )
    return state


def _restore_training(
    state: TrainingState,
    model: __.nn.Module,
    optimizer: __.torch.optim.Optimizer,
    scheduler: __.torch.optim.lr_scheduler.ReduceLROnPlateau,
    stopper: EarlyStopping,
) -> None:
    _load_parameters( model, state.parameters )
    slots: dict[ int, dict[ str, __.Tensor ] ] = { }
    for name, tensor in _import_state( state.optimizer_slots ).items( ):
        index, slot = name.split( '/', 1 )
        slots.setdefault( int( index ), { } )[ slot ] = tensor
    try:
        optimizer.load_state_dict( {
            'state': slots,
            'param_groups': [
                dict( group ) for group in state.optimizer_groups ],
        } )
        scheduler.load_state_dict( dict( state.scheduler ) )
    except ( KeyError, ValueError ) as exception:
        raise _exceptions.CheckpointError(
            '<checkpoint>',
            f"invalid optimizer state ({exception})" ) from exception
    stopper.restore( state.stopper )


def _seed_everything( config: TrainConfig ) -> None:
    __.torch.manual_seed( config.seed )
    __.torch.set_num_threads( config.threads )
    __.torch.use_deterministic_algorithms( True, warn_only = True )


def _write_training(
    archive: __.zipfile.ZipFile, state: TrainingState
) -> None:
    for name, array in state.parameters.items( ):
        archive.writestr(
            f"state/parameters/{name}.npy", _encode_array( array ) )
    for name, array in state.optimizer_slots.items( ):
        archive.writestr(
            f"state/optimizer/{name}.npy", _encode_array( array ) )
