#ifndef SAMCIRT_SAMCIRT_HPP
#define SAMCIRT_SAMCIRT_HPP

#include "samcirt/core.hpp"
#include "samcirt/io.hpp"
#include "samcirt/model.hpp"
#include "samcirt/optimizer.hpp"
#include "samcirt/parallel.hpp"
#include "samcirt/partition.hpp"
#include "samcirt/projector.hpp"
#include "samcirt/random.hpp"
#include "samcirt/scenario.hpp"
#include "samcirt/simulation.hpp"
#include "samcirt/step_size.hpp"
#include "samcirt/verify.hpp"
#include "samcirt/warp.hpp"

#endif // SAMCIRT_SAMCIRT_HPP
