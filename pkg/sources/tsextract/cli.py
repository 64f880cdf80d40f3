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



''' Command-line interface: simulate, train, extract, and evaluate. '''


from __future__ import annotations

from . import __
from . import configuration as _configuration
from . import exceptions as _exceptions
from . import models as _models
from . import objectives as _objectives
from . import separator as _separator
from . import signals as _signals
from . import training as _training


_scribe = __.logging.getLogger( __name__ )


EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SECTIONS = (
    'signal', 'frontend', 'embedder', 'separator', 'objectives', 'training' )


class RunConfig( __.ccstd.DataclassObject ):
    ''' Complete configuration of simulation, model, and training. '''

    signal: _signals.SimulationConfig = __.dcls.field(
        default_factory = _signals.SimulationConfig )
    model: _models.ModelConfig = __.dcls.field(
        default_factory = _models.ModelConfig )
    objectives: _objectives.LossWeights = __.dcls.field(
        default_factory = _objectives.LossWeights )
    training: _training.TrainConfig = __.dcls.field(
        default_factory = _training.TrainConfig )

    def __post_init__( self ) -> None:
        if self.signal.sample_rate != self.model.frontend.sample_rate:
            raise _exceptions.ConfigurationError(
                'frontend',
                f"sample rate {self.model.frontend.sample_rate} differs from "
                f"corpus sample rate {self.signal.sample_rate}" )

    def to_document( self ) -> dict[ str, __.typx.Any ]:
        ''' Sectioned mapping, as read from configuration files. '''
        model = _configuration.record_to_mapping( self.model )
        return {
            'signal': _configuration.record_to_mapping( self.signal ),
            'frontend': model[ 'frontend' ],
            'embedder': model[ 'embedder' ],
            'separator': model[ 'separator' ],
            'objectives': _configuration.record_to_mapping( self.objectives ),
            'training': _configuration.record_to_mapping( self.training ),
        }

    @property
    def digest( self ) -> str:
        ''' Configuration hash recorded in every artifact. '''
        return _configuration.calculate_digest( self.to_document( ) )


def produce_run_config(
    document: __.typx.Annotated[
        __.cabc.Mapping[ str, __.typx.Any ],
        __.ddoc.Doc(
            ''' Sectioned mapping; missing sections use defaults. ''' ),
    ],
) -> RunConfig:
    ''' Produces run configuration, rejecting unknown sections and keys. '''
    unknown = set( document ) - set( SECTIONS )
    if unknown:
        raise _exceptions.ConfigurationError(
            '<document>',
            f"unknown sections: {', '.join( sorted( unknown ) )}" )
    return RunConfig(
        signal = _configuration.produce_record(
            _signals.SimulationConfig, document.get( 'signal', { } ),
            'signal' ),
        model = _models.produce_model_config( document ),
        objectives = _configuration.produce_record(
            _objectives.LossWeights, document.get( 'objectives', { } ),
            'objectives' ),
        training = _configuration.produce_record(
            _training.TrainConfig, document.get( 'training', { } ),
            'training' ) )


def load_run_config(
    location: __.typx.Annotated[
        __.Absential[ __.PathLike ],
        __.ddoc.Doc( ''' TOML file; defaults apply when absent. ''' ),
    ] = __.absent,
) -> RunConfig:
    ''' Loads run configuration from file or defaults. '''
    if __.is_absent( location ): return RunConfig( )
    return produce_run_config( _configuration.load_document( location ) )


def override_run_config(
    config: RunConfig,
    architecture: str | None = None,
    stacks: int | None = None,
    seed: int | None = None,
) -> RunConfig:
    ''' Applies command-line overrides of separator trunk and seed. '''
    separator = _configuration.record_to_mapping( config.model.separator )
    if architecture is not None: separator[ 'architecture' ] = architecture
    if stacks is not None: separator[ 'stacks' ] = stacks
    training = _configuration.record_to_mapping( config.training )
    if seed is not None: training[ 'seed' ] = seed
    document = config.to_document( )
    document.update( separator = separator, training = training )
    return produce_run_config( document )


def produce_parser( ) -> __.argparse.ArgumentParser:
    ''' Builds argument parser with one subcommand per operation. '''
    parser = __.argparse.ArgumentParser(
        prog = __.package_name,
        description = 'Time-domain target speaker extraction.' )
    parser.add_argument(
        '-v', '--verbose', action = 'count', default = 0,
        help = 'more log output (repeatable)' )
    parser.add_argument(
        '-q', '--quiet', action = 'count', default = 0,
        help = 'less log output (repeatable)' )
    commands = parser.add_subparsers( dest = 'command', required = True )
    simulate = commands.add_parser(
        'simulate', help = 'simulate mixture corpora' )
    simulate.add_argument( '--config', type = __.Path )
    simulate.add_argument(
        '--clean-index', type = __.Path, required = True,
        help = 'TSV of speaker and path, or speaker directory tree' )
    simulate.add_argument(
        '--noise-index', type = __.Path,
        help = 'file with one noise recording path per line' )
    simulate.add_argument( '--out-dir', type = __.Path, required = True )
    simulate.add_argument( '--seed', type = int, default = 0 )
    simulate.set_defaults( handler = cmd_simulate )
    train = commands.add_parser( 'train', help = 'train extraction model' )
    train.add_argument( '--config', type = __.Path )
    train.add_argument(
        '--train-manifest', type = __.Path, action = 'append',
        required = True, help = 'repeat to train on several corpora' )
    train.add_argument( '--dev-manifest', type = __.Path, required = True )
    train.add_argument( '--out', type = __.Path, required = True )
    train.add_argument(
        '--architecture',
        choices = [ architecture.value
                    for architecture in _separator.Architectures ] )
    train.add_argument( '--stacks', type = int )
    train.add_argument( '--seed', type = int )
    train.add_argument(
        '--resume', type = __.Path,
        help = 'checkpoint whose training state to continue' )
    train.set_defaults( handler = cmd_train )
    extract = commands.add_parser(
        'extract', help = 'extract target speech from mixture' )
    extract.add_argument( '--checkpoint', type = __.Path, required = True )
    extract.add_argument( '--mixture', type = __.Path, required = True )
    extract.add_argument( '--reference', type = __.Path, required = True )
    extract.add_argument( '--out', type = __.Path, required = True )
    extract.add_argument(
        '--config', type = __.Path,
        help = 'configuration the checkpoint model must match' )
    extract.set_defaults( handler = cmd_extract )
    evaluate = commands.add_parser(
        'evaluate', help = 'score checkpoint on test manifest' )
    evaluate.add_argument( '--checkpoint', type = __.Path, required = True )
    evaluate.add_argument( '--test-manifest', type = __.Path, required = True )
    evaluate.add_argument( '--report', type = __.Path, required = True )
    evaluate.set_defaults( handler = cmd_evaluate )
    return parser


def cmd_simulate( arguments: __.argparse.Namespace ) -> None:
    ''' Simulates train, dev, and test corpora with manifests. '''
    config = load_run_config( arguments.config or __.absent )
    clean = arguments.clean_index
    speech_index = (
        _signals.survey_speech_directory( clean ) if clean.is_dir( )
        else _signals.read_speech_index( clean ) )
    noise_index = (
        _signals.read_noise_index( arguments.noise_index )
        if arguments.noise_index else ( ) )
    _signals.simulate_corpus(
        speech_index, noise_index, config.signal, arguments.seed,
        arguments.out_dir, config_hash = config.digest )


def cmd_train( arguments: __.argparse.Namespace ) -> None:
    ''' Trains model and writes best checkpoint. '''
    config = override_run_config(
        load_run_config( arguments.config or __.absent ),
        architecture = arguments.architecture,
        stacks = arguments.stacks,
        seed = arguments.seed )
    manifests = [
        _signals.load_manifest( location )
        for location in arguments.train_manifest ]
    checkpoint = _training.train(
        manifests, _signals.load_manifest( arguments.dev_manifest ),
        config.model, config.training, config.objectives,
        config_hash = config.digest,
        dump_directory = arguments.out.parent,
        resume = (
            _training.load_checkpoint( arguments.resume, config.model )
            if arguments.resume else __.absent ) )
    _training.save_checkpoint( checkpoint, arguments.out )


def cmd_extract( arguments: __.argparse.Namespace ) -> None:
    ''' Writes extracted target speech and its provenance sidecar. '''
    expected = (
        load_run_config( arguments.config ).model
        if arguments.config else __.absent )
    checkpoint = _training.load_checkpoint(
        arguments.checkpoint, expected = expected )
    rate = checkpoint.model_config.frontend.sample_rate
    estimate = _training.extract(
        checkpoint,
        _signals.read_wav( arguments.mixture, rate ),
        _signals.read_wav( arguments.reference, rate ) )
    _signals.write_wav( arguments.out, estimate )
    sidecar = arguments.out.with_name( f"{arguments.out.name}.json" )
    sidecar.write_text( __.json.dumps( {
        'config_hash': checkpoint.config_hash,
        'checkpoint': str( arguments.checkpoint ),
        'mixture': str( arguments.mixture ),
        'reference': str( arguments.reference ),
    }, indent = 2, sort_keys = True ), encoding = 'utf-8' )


def cmd_evaluate( arguments: __.argparse.Namespace ) -> None:
    ''' Scores checkpoint on test manifest and writes report. '''
    checkpoint = _training.load_checkpoint( arguments.checkpoint )
    report = _training.evaluate(
        checkpoint, _signals.load_manifest( arguments.test_manifest ),
        manifest_label = str( arguments.test_manifest ) )
    _training.save_report( report, arguments.report )


def main(
    arguments: __.typx.Annotated[
        __.cabc.Sequence[ str ] | None,
        __.ddoc.Doc(
            ''' Command-line arguments; process arguments if none. ''' ),
    ] = None,
) -> int:
    ''' Runs subcommand. Returns process exit code. '''
    parser = produce_parser( )
    try: namespace = parser.parse_args( arguments )
    except SystemExit as exception:
        return EXIT_USAGE if exception.code else EXIT_SUCCESS
    level = __.logging.WARNING + 10 * ( namespace.quiet - namespace.verbose )
    __.logging.basicConfig(
        level = min( max( level, __.logging.DEBUG ), __.logging.CRITICAL ),
        format = '%(asctime)s %(levelname)s %(name)s: %(message)s' )
    try: namespace.handler( namespace )
    except ( _exceptions.Omnierror, OSError ) as exception:
        _scribe.error( '%s failed: %s', namespace.command, exception )
        return EXIT_FAILURE
    return EXIT_SUCCESS
