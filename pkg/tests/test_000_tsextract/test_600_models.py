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



''' Assert correct function of the assembled extraction model. '''


import pytest
import torch

from . import __


MODULE_QNAME = f"{__.PACKAGE_NAME}.models"

ARCHITECTURES = ( 'tcn_baseline', 'conformer_ffn', 'tcn_conformer' )


def test_000_model_config_defaults( ):
    ''' Default model widths are consistent. '''
    models = __.cache_import_module( MODULE_QNAME )
    config = models.ModelConfig( )
    assert 'tcn_conformer' == config.architecture
    assert 256 == config.frontend.bottleneck_dim
    assert 256 == config.embedder.embedding_dim
    assert 512 == config.separator.model_dim


def test_010_model_config_rejections( ):
    ''' Mismatched embedder input and separator width are rejected. '''
    models = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    with pytest.raises( exceptions.ConfigurationError, match = 'embedder' ):
        models.produce_model_config( {
            'frontend': { 'bottleneck_dim': 128 },
            'separator': { 'model_dim': 384 } } )
    with pytest.raises( exceptions.ConfigurationError, match = 'separator' ):
        models.produce_model_config( { 'separator': { 'model_dim': 256 } } )
    config = models.produce_model_config( {
        'separator': { 'architecture': 'tcn_baseline', 'model_dim': 256 } } )
    assert 'tcn_baseline' == config.architecture


@pytest.mark.parametrize( 'architecture', ARCHITECTURES )
def test_100_forward_shapes( architecture ):
    ''' Estimates match mixture length; logits cover speakers. '''
    models = __.cache_import_module( MODULE_QNAME )
    model = models.TargetExtractor(
        __.produce_toy_model_config( architecture ), 5 ).eval( )
    assert 5 == model.speakers_count
    with torch.no_grad( ):
        output = model( torch.randn( 2, 1203 ), torch.randn( 2, 900 ) )
    assert 3 == len( output.estimates )
    for estimate in output.estimates:
        assert ( 2, 1203 ) == tuple( estimate.shape )
        assert torch.all( torch.isfinite( estimate ) )
    assert ( 2, 5 ) == tuple( output.logits.shape )
    assert ( 2, 16 ) == tuple( output.embedding.shape )


def test_110_extract_matches_short_scale( ):
    ''' Extraction returns the shortest-scale estimate. '''
    models = __.cache_import_module( MODULE_QNAME )
    model = models.TargetExtractor(
        __.produce_toy_model_config( ), 2 ).eval( )
    mixture, reference = torch.randn( 1, 800 ), torch.randn( 1, 640 )
    with torch.no_grad( ):
        output = model( mixture, reference )
        estimate = model.extract( mixture, reference )
    assert torch.allclose( output.estimates[ 0 ], estimate )


def test_120_batch_independence( ):
    ''' Batch members do not influence each other at inference. '''
    models = __.cache_import_module( MODULE_QNAME )
    model = models.TargetExtractor(
        __.produce_toy_model_config( ), 2 ).eval( )
    mixtures, references = torch.randn( 2, 800 ), torch.randn( 2, 640 )
    with torch.no_grad( ):
        together = model.extract( mixtures, references )
        alone = model.extract( mixtures[ 1 : ], references[ 1 : ] )
    assert torch.allclose( together[ 1 : ], alone, atol = 1e-5 )


def test_130_reference_matters( ):
    ''' Different references produce different estimates. '''
    models = __.cache_import_module( MODULE_QNAME )
    model = models.TargetExtractor(
        __.produce_toy_model_config( ), 2 ).eval( )
    mixture = torch.randn( 1, 800 )
    with torch.no_grad( ):
        first = model.extract( mixture, torch.randn( 1, 640 ) )
        second = model.extract( mixture, torch.randn( 1, 640 ) )
    assert not torch.allclose( first, second )


def test_140_rejects_short_inputs( ):
    ''' Inputs shorter than the shortest filter are rejected. '''
    models = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    model = models.TargetExtractor(
        __.produce_toy_model_config( ), 2 ).eval( )
    with pytest.raises( exceptions.SignalLengthError ):
        model.extract( torch.randn( 1, 800 ), torch.randn( 1, 5 ) )


def test_200_training_step( ):
    ''' One optimizer step changes parameters of every component. '''
    models = __.cache_import_module( MODULE_QNAME )
    objectives = __.cache_import_module( f"{__.PACKAGE_NAME}.objectives" )
    model = models.TargetExtractor( __.produce_toy_model_config( ), 2 )
    optimizer = torch.optim.Adam( model.parameters( ), lr = 1e-3 )
    before = {
        name: parameter.detach( ).clone( )
        for name, parameter in model.named_parameters( ) }
    mixture, target = torch.randn( 2, 800 ), torch.randn( 2, 800 )
    output = model( mixture, torch.randn( 2, 640 ) )
    loss = objectives.multitask_loss(
        output.estimates, target, output.logits, torch.tensor( [ 0, 1 ] ),
        objectives.LossWeights( ) )
    loss.backward( )
    optimizer.step( )
    for component in (
        'encoder', 'bottleneck', 'embedder', 'speaker_head',
        'separator', 'maskhead', 'decoder',
    ):
        assert any(
            not torch.equal( before[ name ], parameter )
            for name, parameter in model.named_parameters( )
            if name.startswith( f"{component}." ) )
