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



''' Assert correct function of speaker embedder and classification head. '''


import pytest
import torch

from . import __


MODULE_QNAME = f"{__.PACKAGE_NAME}.embedder"


def _produce_tiny_embedder( ):
    embedder = __.cache_import_module( MODULE_QNAME )
    return embedder.SpeakerEmbedder( embedder.EmbedderConfig(
        block_dims = ( ( 6, 6 ), ( 6, 8 ), ( 8, 8 ) ), embedding_dim = 5 ) )


def test_000_default_dimensions( ):
    ''' Default embedder chains 256, 512, 512 and projects to 256. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    model = embedder.SpeakerEmbedder( embedder.EmbedderConfig( ) )
    assert [ ( 256, 256 ), ( 256, 512 ), ( 512, 512 ) ] == [
        ( block.in_dim, block.out_dim ) for block in model.blocks ]
    assert 256 == model.input_dim
    assert ( 256, 512, 1 ) == tuple( model.projection.weight.shape )
    assert isinstance( model.blocks[ 0 ].skip, torch.nn.Identity )
    assert isinstance( model.blocks[ 1 ].skip, torch.nn.Conv1d )


def test_100_block_pooling( ):
    ''' Each block pools three frames into one. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    block = embedder.ResidualBlock( 6, 8 ).eval( )
    with torch.no_grad( ):
        assert ( 2, 3, 8 ) == tuple( block( torch.randn( 2, 9, 6 ) ).shape )
        assert ( 2, 4, 8 ) == tuple( block( torch.randn( 2, 10, 6 ) ).shape )
        assert ( 1, 1, 8 ) == tuple( block( torch.randn( 1, 1, 6 ) ).shape )


def test_110_block_rejects_width( ):
    ''' Blocks demand their input width. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    block = embedder.ResidualBlock( 6, 8 )
    with pytest.raises( exceptions.DimensionMismatchError ):
        block( torch.randn( 2, 9, 8 ) )


@pytest.mark.parametrize( 'frames', ( 1, 2, 9, 50 ) )
def test_200_embedding_shape( frames ):
    ''' References of any length embed into one fixed-size vector. '''
    model = _produce_tiny_embedder( ).eval( )
    with torch.no_grad( ):
        embedding = model( torch.randn( 3, frames, 6 ) )
    assert ( 3, 5 ) == tuple( embedding.shape )
    assert torch.all( torch.isfinite( embedding ) )


def test_210_embedding_deterministic( ):
    ''' Inference embeddings are deterministic. '''
    model = _produce_tiny_embedder( ).eval( )
    features = torch.randn( 2, 27, 6 )
    with torch.no_grad( ):
        assert torch.equal( model( features ), model( features ) )


def test_220_length_normalization( ):
    ''' Optional length normalization yields unit vectors. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    model = embedder.SpeakerEmbedder( embedder.EmbedderConfig(
        block_dims = ( ( 6, 6 ), ), embedding_dim = 5,
        length_normalize = True ) ).eval( )
    with torch.no_grad( ):
        embedding = model( torch.randn( 4, 12, 6 ) )
    assert torch.allclose( embedding.norm( dim = -1 ), torch.ones( 4 ) )


def test_300_speaker_head( ):
    ''' Zero classifier yields uniform speaker posteriors. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    head = embedder.SpeakerHead( 5, 4 )
    torch.nn.init.zeros_( head.classifier.weight )
    torch.nn.init.zeros_( head.classifier.bias )
    with torch.no_grad( ):
        posteriors = torch.softmax( head( torch.randn( 2, 5 ) ), dim = -1 )
    assert torch.allclose( posteriors, torch.full( ( 2, 4 ), 0.25 ) )
    with pytest.raises( exceptions.DimensionMismatchError ):
        head( torch.randn( 2, 6 ) )
    with pytest.raises( exceptions.ConfigurationError ):
        embedder.SpeakerHead( 5, 1 )


def test_310_speaker_accuracy( ):
    ''' Accuracy counts matching argmax predictions. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    logits = torch.tensor( [ [ 2.0, 1.0 ], [ 0.0, 3.0 ], [ 1.0, 0.0 ] ] )
    labels = torch.tensor( [ 0, 1, 1 ] )
    assert 2 / 3 == embedder.speaker_accuracy( logits, labels )
    labels = torch.arange( 7 ) % 2
    logits = torch.zeros( 7, 2 )
    logits[ :, 0 ] = 1.0
    assert 4 / 7 == embedder.speaker_accuracy( logits, labels )
    assert 0.0 == embedder.speaker_accuracy(
        torch.zeros( 0, 2 ), torch.zeros( 0, dtype = torch.long ) )


def test_320_cosine_similarity( ):
    ''' Embeddings are most similar to themselves. '''
    embedder = __.cache_import_module( MODULE_QNAME )
    first = torch.tensor( [ [ 1.0, 0.0 ] ] )
    second = torch.tensor( [ [ 0.0, 2.0 ] ] )
    assert torch.allclose(
        embedder.cosine_similarity( first, 3 * first ), torch.ones( 1 ) )
    assert torch.allclose(
        embedder.cosine_similarity( first, second ), torch.zeros( 1 ) )


def test_400_gradients( ):
    ''' Analytic gradients agree with finite differences. '''
    model = _produce_tiny_embedder( ).double( ).eval( )
    features = torch.randn(
        2, 9, 6, dtype = torch.float64, requires_grad = True )
    assert torch.autograd.gradcheck( model, ( features, ) )
