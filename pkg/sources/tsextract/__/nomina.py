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



''' Common names and type aliases. '''


from . import imports as __


# Audio samples as floating point amplitudes. Mono; one dimension.
Samples: __.typx.TypeAlias = __.np.ndarray[ __.typx.Any, __.typx.Any ]
Tensor: __.typx.TypeAlias = __.torch.Tensor
# Time-major features: [ batch, frames, channels ].
FeatureMap: __.typx.TypeAlias = __.torch.Tensor
# Speaker embeddings: [ batch, embedding_dim ].
SpeakerEmbedding: __.typx.TypeAlias = __.torch.Tensor

PathLike: __.typx.TypeAlias = str | __.Path


package_name = __name__.split( '.', maxsplit = 1 )[ 0 ]
