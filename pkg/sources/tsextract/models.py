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



''' Assembly of the jointly trained target speaker extraction system. '''


from __future__ import annotations

from . import __
from . import configuration as _configuration
from . import embedder as _embedder
from . import exceptions as _exceptions
from . import frontend as _frontend
from . import separator as _separator


class ModelConfig( __.ccstd.DataclassObject ):
    ''' Settings for every trainable component. '''

    frontend: _frontend.FrontendConfig = __.dcls.field(
        default_factory = _frontend.FrontendConfig )
    embedder: _embedder.EmbedderConfig = __.dcls.field(
        default_factory = _embedder.EmbedderConfig )
    separator: _separator.SeparatorConfig = __.dcls.field(
        default_factory = _separator.SeparatorConfig )

    def __post_init__( self ) -> None:
        bottleneck_dim = self.frontend.bottleneck_dim
        embedder_input = self.embedder.block_dims[ 0 ][ 0 ]
        if embedder_input != bottleneck_dim:
            raise _exceptions.ConfigurationError(
                'embedder',
                f"first block expects {embedder_input} channels but "
                f"bottleneck provides {bottleneck_dim}" )
        architecture = _separator.Architectures( self.separator.architecture )
        if architecture is _separator.Architectures.TcnBaseline: return
        model_dim = bottleneck_dim + self.embedder.embedding_dim
        if model_dim != self.separator.model_dim:
            raise _exceptions.ConfigurationError(
                'separator',
                f"model_dim {self.separator.model_dim} differs from "
                f"bottleneck plus embedding dimensions ({model_dim})" )

    @property
    def architecture( self ) -> str:
        ''' Name of separator trunk. '''
        return self.separator.architecture


def produce_model_config(
    document: __.typx.Annotated[
        __.cabc.Mapping[ str, __.typx.Any ],
        __.ddoc.Doc( ''' Mapping with optional per-component sections. ''' ),
    ],
) -> ModelConfig:
    ''' Produces model configuration from nested mapping. '''
    sections: dict[ str, __.typx.Any ] = { }
    for name, class_ in (
        ( 'frontend', _frontend.FrontendConfig ),
        ( 'embedder', _embedder.EmbedderConfig ),
        ( 'separator', _separator.SeparatorConfig ),
    ):
        sections[ name ] = _configuration.produce_record(
            class_, document.get( name, { } ), name )
    return ModelConfig( **sections )


class ExtractionOutput( __.typx.NamedTuple ):
    ''' Decoder estimates, speaker logits, and speaker embedding. '''

    estimates: tuple[ __.Tensor, __.Tensor, __.Tensor ]
    logits: __.Tensor
    embedding: __.SpeakerEmbedding


class TargetExtractor( __.nn.Module ):
    ''' Speaker embedder and separator sharing one multi-scale encoder.

        The reference utterance and the mixture pass through the same
        encoder and bottleneck. The separator output drives one mask per
        encoder scale; each masked scale is decoded separately.
    '''

    def __init__(
        self,
        config: ModelConfig,
        speakers_count: __.typx.Annotated[
            int, __.ddoc.Doc( ''' Size of speaker head vocabulary. ''' )
        ],
    ) -> None:
        super( ).__init__( )
        self.config = config
        frontend = config.frontend
        embedding_dim = config.embedder.embedding_dim
        self.encoder = _frontend.MultiscaleEncoder( frontend )
        self.bottleneck = _frontend.Bottleneck( frontend )
        self.embedder = _embedder.SpeakerEmbedder( config.embedder )
        self.speaker_head = _embedder.SpeakerHead(
            embedding_dim, speakers_count )
        self.separator = _separator.produce_separator(
            config.separator, frontend.bottleneck_dim, embedding_dim )
        self.maskhead = _separator.MaskHeads(
            frontend.bottleneck_dim, frontend.channels_per_scale )
        self.decoder = _frontend.MultiscaleDecoder( frontend )

    @property
    def speakers_count( self ) -> int:
        ''' Size of speaker head vocabulary. '''
        return self.speaker_head.classifier.out_features

    def embed(
        self,
        reference: __.typx.Annotated[
            __.Tensor, __.ddoc.Doc( ''' Samples [ batch, length ]. ''' )
        ],
    ) -> __.SpeakerEmbedding:
        ''' Speaker embedding of reference speech. '''
        encoded = self.encoder.encode_multiscale( reference )
        features = self.bottleneck( encoded )
        return self.embedder( features )

    def estimate_masks(
        self, mixture: __.Tensor, embedding: __.SpeakerEmbedding
    ) -> tuple[ tuple[ __.FeatureMap, ... ], _separator.MaskSet ]:
        ''' Encoded mixture per scale and masks conditioned on embedding. '''
        encoded = self.encoder( mixture )
        features = self.bottleneck( __.torch.cat( encoded, dim = -1 ) )
        return encoded, self.maskhead( self.separator( features, embedding ) )

    def forward(
        self, mixture: __.Tensor, reference: __.Tensor
    ) -> ExtractionOutput:
        embedding = self.embed( reference )
        encoded, masks = self.estimate_masks( mixture, embedding )
        masked = [
            features * mask
            for features, mask in zip( encoded, masks, strict = True ) ]
        estimates = self.decoder( masked, mixture.shape[ -1 ] )
        return ExtractionOutput(
            estimates = estimates,
            logits = self.speaker_head( embedding ),
            embedding = embedding )

    def extract( self, mixture: __.Tensor, reference: __.Tensor ) -> __.Tensor:
        ''' Shortest-scale estimate only, as used for system output. '''
        embedding = self.embed( reference )
        encoded, masks = self.estimate_masks( mixture, embedding )
        return self.decoder.decode_scale(
            encoded[ 0 ] * masks.short, _frontend.Scales.Short,
            mixture.shape[ -1 ] )
