#pragma once

#include "checkpoint.hpp"
#include "common.hpp"
#include "csv.hpp"
#include "data_pipeline.hpp"
#include "heads.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "nn.hpp"
#include "normal.hpp"
#include "optimizer.hpp"
#include "sampler.hpp"
#include "schema.hpp"
#include "tokenizer.hpp"
#include "trainer.hpp"
#include "transformer.hpp"
