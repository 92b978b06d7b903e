#pragma once

#include "dcpkit/error.hpp"
#include "dcpkit/image.hpp"
#include "dcpkit/geometry.hpp"
#include "dcpkit/filtering.hpp"
#include "dcpkit/descriptors.hpp"
#include "dcpkit/entropy.hpp"
#include "dcpkit/random_field.hpp"
#include "dcpkit/representation.hpp"
#include "dcpkit/learning.hpp"
#include "dcpkit/evaluation.hpp"
#include "dcpkit/io.hpp"
#include "dcpkit/parallel.hpp"
#include "dcpkit/manifest.hpp"
#include "dcpkit/synth.hpp"
#include "dcpkit/protocol.hpp"
