#pragma once

#include "types.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "kkt.hpp"
#include "lmi_builder.hpp"
#include "ipm.hpp"
#include "conic.hpp"
#include "sdp.hpp"
#include "sdpa.hpp"
#include "lyapunov.hpp"
#include "simulator.hpp"
#include "certify.hpp"
