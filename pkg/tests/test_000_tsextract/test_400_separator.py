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



''' Assert correct function of separator blocks and trunks. '''


import pytest
import torch

from . import __


MODULE_QNAME = f"{__.PACKAGE_NAME}.separator"

ARCHITECTURES = ( 'tcn_baseline', 'conformer_ffn', 'tcn_conformer' )


def _produce_small_config( architecture = 'tcn_conformer', **overrides ):
    separator = __.cache_import_module( MODULE_QNAME )
    arguments = dict(
        architecture = architecture, stacks = 2, model_dim = 8, heads = 2,
        conv_kernel = 3, tcn_hidden = 8, dropout = 0.0,
        relative_distance = 4, baseline_stacks = 1, baseline_blocks = 2 )
    arguments.update( overrides )
    return separator.SeparatorConfig( **arguments )


def _zero_linear( layer ):
    torch.nn.init.zeros_( layer.weight )
    torch.nn.init.zeros_( layer.bias )


def test_000_concat_embedding( ):
    ''' Embedding is repeated onto every frame. '''
    separator = __.cache_import_module( MODULE_QNAME )
    features = torch.zeros( 2, 5, 3 )
    embedding = torch.arange( 4.0 ).repeat( 2, 1 )
    combined = separator.concat_embedding( features, embedding )
    assert ( 2, 5, 7 ) == tuple( combined.shape )
    assert torch.equal( combined[ :, 3, 3 : ], embedding )


def test_010_global_layer_norm( ):
    ''' Global normalization yields zero mean and unit variance. '''
    separator = __.cache_import_module( MODULE_QNAME )
    norm = separator.GlobalLayerNorm( 4 )
    with torch.no_grad( ):
        output = norm( 3.0 + 2.0 * torch.randn( 2, 4, 50 ) )
    assert torch.allclose(
        output.mean( dim = ( 1, 2 ) ), torch.zeros( 2 ), atol = 1e-5 )
    assert torch.allclose(
        output.var( dim = ( 1, 2 ), unbiased = False ), torch.ones( 2 ),
        atol = 1e-4 )


def test_100_tcn_block( ):
    ''' TCN blocks preserve shape and report receptive fields. '''
    separator = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    block = separator.TcnBlock( 6, 10, 3, dilation = 4, embedding_dim = 2 )
    assert 9 == block.receptive_field
    assert 8 == block.input_conv.in_channels
    assert 10 == block.depthwise_conv.groups
    with torch.no_grad( ):
        output = block( torch.randn( 2, 7, 6 ), torch.randn( 2, 2 ) )
    assert ( 2, 7, 6 ) == tuple( output.shape )
    with pytest.raises( exceptions.DimensionMismatchError ):
        block( torch.randn( 2, 7, 6 ) )
    with pytest.raises( exceptions.DimensionMismatchError ):
        block( torch.randn( 2, 7, 5 ), torch.randn( 2, 2 ) )


def test_110_tcn_block_residual( ):
    ''' Zeroed output convolution reduces TCN block to identity. '''
    separator = __.cache_import_module( MODULE_QNAME )
    block = separator.TcnBlock( 6, 10 )
    _zero_linear( block.output_conv )
    features = torch.randn( 1, 9, 6 )
    with torch.no_grad( ):
        assert torch.equal( features, block( features ) )


def test_120_tcn_block_locality( ):
    ''' Output frames depend only on frames within receptive field. '''
    separator = __.cache_import_module( MODULE_QNAME )
    block = separator.TcnBlock( 3, 4, 3, dilation = 2 ).double( )
    features = torch.randn( 1, 20, 3, dtype = torch.float64 )
    changed = features.clone( )
    changed[ 0, 15 ] += 1.0
    # Global normalization couples all frames.
    block.norm1 = torch.nn.Identity( )
    block.norm2 = torch.nn.Identity( )
    with torch.no_grad( ):
        first, second = block( features ), block( changed )
    assert torch.equal( first[ 0, : 13 ], second[ 0, : 13 ] )
    assert not torch.equal( first[ 0, 13 : 18 ], second[ 0, 13 : 18 ] )
    assert torch.equal( first[ 0, 18 : ], second[ 0, 18 : ] )


def test_200_attention_weights( ):
    ''' Attention rows are distributions over frames. '''
    separator = __.cache_import_module( MODULE_QNAME )
    attention = separator.RelativeSelfAttention( 8, 2, max_distance = 3 )
    assert ( 7, 4 ) == tuple( attention.relative_keys.weight.shape )
    with torch.no_grad( ):
        output, weights = attention( torch.randn( 3, 11, 8 ) )
    assert ( 3, 11, 8 ) == tuple( output.shape )
    assert ( 3, 2, 11, 11 ) == tuple( weights.shape )
    assert torch.all( weights >= 0 )
    assert torch.allclose( weights.sum( dim = -1 ), torch.ones( 3, 2, 11 ) )


def test_210_attention_heads_divide( ):
    ''' Heads must divide attention width. '''
    separator = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    with pytest.raises( exceptions.ConfigurationError ):
        separator.RelativeSelfAttention( 10, 4 )


def test_220_attention_position_sensitive( ):
    ''' Relative position keys break permutation equivariance. '''
    separator = __.cache_import_module( MODULE_QNAME )
    attention = separator.RelativeSelfAttention( 4, 1, max_distance = 2 )
    attention.double( )
    features = torch.randn( 1, 6, 4, dtype = torch.float64 )
    order = torch.tensor( [ 5, 4, 3, 2, 1, 0 ] )
    with torch.no_grad( ):
        torch.nn.init.normal_( attention.relative_keys.weight, std = 3.0 )
        direct, _ = attention( features )
        flipped, _ = attention( features[ :, order ] )
        assert not torch.allclose( direct[ :, order ], flipped )
        torch.nn.init.zeros_( attention.relative_keys.weight )
        direct, _ = attention( features )
        flipped, _ = attention( features[ :, order ] )
        assert torch.allclose( direct[ :, order ], flipped )


def test_300_conformer_dimensions( ):
    ''' Default conformer widths match reference configuration. '''
    separator = __.cache_import_module( MODULE_QNAME )
    config = separator.SeparatorConfig( )
    block = separator.ConformerBlock( 512, config )
    assert 2048 == block.ffn1.expand.out_features
    assert 2048 == block.ffn2.expand.out_features
    assert 1536 == block.convolution.pointwise_in.out_channels
    assert 31 == block.convolution.depthwise_conv.kernel_size[ 0 ]
    assert 1536 == block.convolution.depthwise_conv.groups
    assert 8 == block.attention.heads
    feedforward = separator.ExternalFeedForward( 512, 0.1 )
    assert ( 512, 256 ) == ( feedforward.in_dim, feedforward.out_dim )
    assert 256 == feedforward.layer2.out_features


def test_310_conformer_glu_gating( ):
    ''' GLU gating doubles then halves convolution width. '''
    separator = __.cache_import_module( MODULE_QNAME )
    convolution = separator.ConformerConvolution( 8, 3, 3, 'glu2x', 0.0 )
    assert 16 == convolution.pointwise_in.out_channels
    assert 8 == convolution.depthwise_conv.in_channels
    with torch.no_grad( ):
        output = convolution.eval( )( torch.randn( 2, 5, 8 ) )
    assert ( 2, 5, 8 ) == tuple( output.shape )


def test_320_conformer_identity( ):
    ''' Silenced sub-blocks reduce conformer block to final norm. '''
    separator = __.cache_import_module( MODULE_QNAME )
    block = separator.ConformerBlock( 8, _produce_small_config( ) ).eval( )
    _zero_linear( block.ffn1.contract )
    _zero_linear( block.ffn2.contract )
    _zero_linear( block.attention.output )
    _zero_linear( block.convolution.pointwise_out )
    features = torch.randn( 2, 6, 8 )
    with torch.no_grad( ):
        assert torch.allclose(
            block( features ), block.final_norm( features ) )


def test_330_conformer_rejects_width( ):
    ''' Conformer blocks demand their width. '''
    separator = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    block = separator.ConformerBlock( 8, _produce_small_config( ) )
    with pytest.raises( exceptions.DimensionMismatchError ):
        block( torch.randn( 2, 6, 4 ) )


@pytest.mark.parametrize( 'architecture', ARCHITECTURES )
@pytest.mark.parametrize( 'frames', ( 1, 2, 5, 100 ) )
def test_400_separator_shapes( architecture, frames ):
    ''' Trunks map bottleneck features to bottleneck width. '''
    separator = __.cache_import_module( MODULE_QNAME )
    trunk = separator.produce_separator(
        _produce_small_config( architecture ), 4, 4 ).eval( )
    with torch.no_grad( ):
        output = trunk( torch.randn( 2, frames, 4 ), torch.randn( 2, 4 ) )
    assert ( 2, frames, 4 ) == tuple( output.shape )
    assert torch.all( torch.isfinite( output ) )


@pytest.mark.parametrize( 'architecture', ARCHITECTURES )
def test_410_separator_rejections( architecture ):
    ''' Trunks reject mismatched features and embeddings. '''
    separator = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    trunk = separator.produce_separator(
        _produce_small_config( architecture ), 4, 4 )
    with pytest.raises( exceptions.DimensionMismatchError ):
        trunk( torch.randn( 2, 5, 5 ), torch.randn( 2, 4 ) )
    with pytest.raises( exceptions.DimensionMismatchError ):
        trunk( torch.randn( 2, 5, 4 ), torch.randn( 2, 3 ) )


def test_420_separator_model_dim( ):
    ''' Conformer trunks need model width of bottleneck plus embedding. '''
    separator = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    with pytest.raises( exceptions.ConfigurationError ):
        separator.produce_separator( _produce_small_config( ), 4, 6 )
    with pytest.raises( exceptions.ConfigurationError ):
        separator.produce_separator(
            _produce_small_config( 'conformer_ffn' ), 6, 2 )
    trunk = separator.produce_separator(
        _produce_small_config( 'tcn_baseline' ), 6, 2 )
    assert isinstance( trunk, separator.TcnBaselineSeparator )


def test_425_separator_base_abstract( ):
    ''' Base trunk cannot be built without a transform. '''
    separator = __.cache_import_module( MODULE_QNAME )
    with pytest.raises( TypeError, match = 'run' ):
        separator.Separator( _produce_small_config( ), 4, 4 )
    assert { 'run' } == set( separator.Separator.__abstractmethods__ )
    for name in ( 'ConformerFfnSeparator', 'TcnConformerSeparator',
                  'TcnBaselineSeparator' ):
        assert not getattr( separator, name ).__abstractmethods__


def test_430_tcn_conformer_structure( ):
    ''' Each stack holds TCN, conformer, and projection in order. '''
    separator = __.cache_import_module( MODULE_QNAME )
    trunk = separator.produce_separator(
        _produce_small_config( tcn_dilations = ( 1, 2 ), stacks = 3 ), 4, 4 )
    stacks = list( trunk.iterate_stacks( ) )
    assert 3 == len( stacks )
    assert [ 1, 2, 1 ] == [ stack.tcn.dilation for stack in stacks ]
    assert [ 'tcn', 'conformer', 'proj' ] == [
        name for name, _ in stacks[ 0 ].named_children( ) ]
    assert ( 4, 8 ) == tuple( stacks[ 0 ].proj.weight.shape )


def test_431_tcn_conformer_silenced( ):
    ''' Zeroed final projection silences TCN-conformer output. '''
    separator = __.cache_import_module( MODULE_QNAME )
    trunk = separator.produce_separator(
        _produce_small_config( ), 4, 4 ).eval( )
    *_, last = trunk.iterate_stacks( )
    _zero_linear( last.proj )
    with torch.no_grad( ):
        output = trunk( torch.randn( 2, 5, 4 ), torch.randn( 2, 4 ) )
    assert not torch.any( output )


def test_440_conformer_ffn_structure( ):
    ''' Each stack halves conformer output back to bottleneck width. '''
    separator = __.cache_import_module( MODULE_QNAME )
    trunk = separator.produce_separator(
        _produce_small_config( 'conformer_ffn' ), 4, 4 )
    for stack in trunk.iterate_stacks( ):
        assert 8 == stack.conformer.dim
        assert ( 8, 4 ) == ( stack.ffn.in_dim, stack.ffn.out_dim )


def test_450_baseline_dilations( ):
    ''' Baseline dilations double within each stack. '''
    separator = __.cache_import_module( MODULE_QNAME )
    trunk = separator.produce_separator(
        _produce_small_config(
            'tcn_baseline', baseline_stacks = 2, baseline_blocks = 4 ),
        4, 4 )
    assert ( 1, 2, 4, 8, 1, 2, 4, 8 ) == trunk.dilations
    for stack in trunk.iterate_stacks( ):
        assert [ 4, 0, 0, 0 ] == [
            block.embedding_dim for block in stack.tcn ]


@pytest.mark.parametrize(
    'architecture', ( 'conformer_ffn', 'tcn_conformer' ) )
def test_460_parameters_linear_in_stacks( architecture ):
    ''' Trunk parameters grow by a constant per stack. '''
    separator = __.cache_import_module( MODULE_QNAME )
    counts = [
        separator.count_parameters( separator.produce_separator(
            _produce_small_config( architecture, stacks = stacks ), 4, 4 ) )
        for stacks in ( 1, 2, 3 ) ]
    assert counts[ 1 ] - counts[ 0 ] == counts[ 2 ] - counts[ 1 ] > 0


def test_500_mask_heads( ):
    ''' Mask heads emit non-negative masks per scale. '''
    separator = __.cache_import_module( MODULE_QNAME )
    exceptions = __.cache_import_module( f"{__.PACKAGE_NAME}.exceptions" )
    heads = separator.MaskHeads( 4, 6 )
    with torch.no_grad( ):
        masks = heads( torch.randn( 2, 5, 4 ) )
    assert 3 == len( masks )
    for mask in masks:
        assert ( 2, 5, 6 ) == tuple( mask.shape )
        assert torch.all( mask >= 0 )
    with pytest.raises( exceptions.DimensionMismatchError ):
        heads( torch.randn( 2, 5, 6 ) )


def test_600_block_gradients( ):
    ''' Analytic block gradients agree with finite differences. '''
    separator = __.cache_import_module( MODULE_QNAME )
    config = _produce_small_config( )
    features = torch.randn(
        2, 6, 8, dtype = torch.float64, requires_grad = True )
    attention = separator.RelativeSelfAttention( 8, 2, 0.0, 4 ).double( )
    assert torch.autograd.gradcheck(
        lambda x: attention( x )[ 0 ], ( features, ) )
    conformer = separator.ConformerBlock( 8, config ).double( ).eval( )
    assert torch.autograd.gradcheck( conformer, ( features, ) )
    tcn = separator.TcnBlock( 8, 8 ).double( )
    assert torch.autograd.gradcheck( tcn, ( features, ) )


@pytest.mark.parametrize( 'architecture', ARCHITECTURES )
def test_610_separator_gradients( architecture ):
    ''' Analytic trunk gradients agree with finite differences. '''
    separator = __.cache_import_module( MODULE_QNAME )
    trunk = separator.produce_separator(
        _produce_small_config( architecture, stacks = 1 ), 4, 4 )
    trunk.double( ).eval( )
    features = torch.randn(
        2, 6, 4, dtype = torch.float64, requires_grad = True )
    embedding = torch.randn(
        2, 4, dtype = torch.float64, requires_grad = True )
    assert torch.autograd.gradcheck( trunk, ( features, embedding ) )
