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



''' Time-domain target speaker extraction.

    A speaker embedder and a mask-estimating separator share one
    multi-scale learned encoder. The embedder summarizes a reference
    utterance of the target speaker; the separator, built from TCN and
    conformer blocks, uses that summary to mask the encoded mixture, and
    the decoder returns the target speech. Also included are corpus
    simulation, joint training with SI-SNR and speaker cross-entropy
    objectives, and SI-SDR evaluation.
'''


from . import __
from . import cli
from . import configuration
from . import embedder
from . import exceptions
from . import frontend
from . import models
from . import objectives
from . import separator
from . import signals
from . import training
# --- BEGIN: Injected by Copier ---
# --- END: Injected by Copier ---


__version__ = '0.1a0'


__.ccstd.finalize_module( __name__, recursive = True )
